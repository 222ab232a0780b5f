#include "felab/state_space.hpp"

#include "felab/math_utils.hpp"

namespace felab {

StateSpace::StateSpace(std::vector<Factor> factors) : factors_(std::move(factors)) {
    joint_size_ = 1;
    for (const auto& f : factors_) {
        if (f.size < 1) throw ModelError("state factor '" + f.name + "' has cardinality < 1");
        joint_size_ *= f.size;
    }
}

int StateSpace::to_joint(std::span<const int> indices) const {
    int joint = 0;
    for (std::size_t f = 0; f < factors_.size(); ++f) {
        joint = joint * factors_[f].size + indices[f];
    }
    return joint;
}

std::vector<int> StateSpace::from_joint(int joint) const {
    std::vector<int> out(factors_.size());
    for (int f = num_factors() - 1; f >= 0; --f) {
        out[f] = joint % factors_[f].size;
        joint /= factors_[f].size;
    }
    return out;
}

std::vector<double> StateSpace::marginal(std::span<const double> joint, int f) const {
    std::vector<double> out(factors_[f].size, 0.0);
    // stride of factor f and size of the block below it
    int below = 1;
    for (int g = num_factors() - 1; g > f; --g) below *= factors_[g].size;
    for (int j = 0; j < joint_size_; ++j) {
        out[(j / below) % factors_[f].size] += joint[j];
    }
    return out;
}

std::vector<double> StateSpace::outer(const std::vector<std::vector<double>>& per_factor) const {
    std::vector<double> out(joint_size_, 1.0);
    for (int j = 0; j < joint_size_; ++j) {
        auto idx = from_joint(j);
        for (int f = 0; f < num_factors(); ++f) out[j] *= per_factor[f][idx[f]];
    }
    return out;
}

} // namespace felab
