#ifndef VACMECH_VACMECH_HPP
#define VACMECH_VACMECH_HPP

// Umbrella header: hybrid atom-optomechanics spectra, perturbative coupling
// rates, and dressed-state Lindblad dynamics.

#include "fock.hpp"
#include "io.hpp"
#include "lindblad.hpp"
#include "model.hpp"
#include "perturb.hpp"
#include "runner.hpp"
#include "spectra.hpp"
#include "util.hpp"

#endif
