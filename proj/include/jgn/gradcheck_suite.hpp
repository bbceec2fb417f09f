#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jgn/network.hpp"

namespace jgn {

/// Worst relative error seen over the checked coordinates of one tensor.
struct GroupError {
    std::string group;
    double max_rel_error = 0;
    std::size_t coords = 0;
};

struct GradcheckOptions {
    std::size_t coords_per_group = 4;  // sampled when a tensor is larger
    double step = 1e-4;
    std::uint64_t seed = 1;
    Ablation ablation = Ablation::full;
    std::size_t size = 16;   // model scope: image side
    std::size_t pairs = 2;   // model scope: cover/stego pairs in the batch
};

/// tensor-core, preprocess, sfe, gal, backbone, model
const std::vector<std::string>& gradcheck_scopes();

/// Wide-precision finite-difference checks for one scope ("all" runs every
/// scope). Throws std::invalid_argument on an unknown scope.
std::vector<GroupError> run_gradcheck(const std::string& scope, const GradcheckOptions& opt = {});

double max_error(const std::vector<GroupError>& groups);

}  // namespace jgn
