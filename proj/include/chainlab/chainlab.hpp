#pragma once
// Everything the numerical library offers, in one include. The command-line
// layer under chainlab/cli/ is not pulled in.

#include "chainlab/errors.hpp"
#include "chainlab/parallel.hpp"
#include "chainlab/potential.hpp"
#include "chainlab/equilibria.hpp"
#include "chainlab/symmetry.hpp"
#include "chainlab/spectra.hpp"
#include "chainlab/integrator.hpp"
#include "chainlab/orbits.hpp"
