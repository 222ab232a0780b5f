#pragma once

#include <span>
#include <string>
#include <vector>

namespace felab {

/// Factorized hidden-state space with a fixed tensor-product ordering:
/// the first factor is the major index (for FrozenLake, location-major).
class StateSpace {
public:
    struct Factor {
        std::string name;
        int size = 0;
    };

    StateSpace() = default;
    explicit StateSpace(std::vector<Factor> factors);

    int num_factors() const { return static_cast<int>(factors_.size()); }
    const Factor& factor(int f) const { return factors_[f]; }
    int joint_size() const { return joint_size_; }

    int to_joint(std::span<const int> indices) const;
    std::vector<int> from_joint(int joint) const;

    /// Marginal of a joint distribution onto one factor.
    std::vector<double> marginal(std::span<const double> joint, int f) const;

    /// Outer product of per-factor distributions into a joint distribution.
    std::vector<double> outer(const std::vector<std::vector<double>>& per_factor) const;

private:
    std::vector<Factor> factors_;
    int joint_size_ = 1;
};

} // namespace felab
