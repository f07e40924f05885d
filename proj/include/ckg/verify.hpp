#pragma once

#include <cstdint>
#include <vector>

#include "ckg/training.hpp"

namespace ckg {

/// Property checks run by the `prop-suite` experiment. Each entry reports
/// the worst observed deviation against its tolerance.
std::vector<CheckResult> run_prop_suite(std::uint64_t seed);

std::vector<CheckResult> check_efficient_global(std::uint64_t seed, int instances = 50);
std::vector<CheckResult> check_set_network_degeneration(std::uint64_t seed, int instances = 50);
std::vector<CheckResult> check_polynomial_filter(std::uint64_t seed, int instances = 50);
std::vector<CheckResult> check_layernorm_degree_cancellation(std::uint64_t seed);
std::vector<CheckResult> check_gradients(std::uint64_t seed, int points = 10);
std::vector<CheckResult> check_wl_probe(std::uint64_t seed);
std::vector<CheckResult> check_equivariance(std::uint64_t seed, int graphs = 10, int perms = 20);
std::vector<CheckResult> check_rrwp(std::uint64_t seed, int graphs = 50);

}  // namespace ckg
