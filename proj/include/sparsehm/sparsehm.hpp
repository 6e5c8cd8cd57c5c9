#ifndef SPARSEHM_SPARSEHM_HPP
#define SPARSEHM_SPARSEHM_HPP

#include <sparsehm/core.hpp>
#include <sparsehm/transform.hpp>
#include <sparsehm/reservoir.hpp>
#include <sparsehm/single_phase.hpp>
#include <sparsehm/two_phase.hpp>
#include <sparsehm/linear_model.hpp>
#include <sparsehm/sensitivity.hpp>
#include <sparsehm/irls.hpp>
#include <sparsehm/reservoir_model.hpp>
#include <sparsehm/experiments.hpp>
#include <sparsehm/io.hpp>

#endif
