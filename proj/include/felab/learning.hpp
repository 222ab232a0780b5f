#pragma once

#include <span>
#include <vector>

#include "felab/generative_model.hpp"

namespace felab {

/// a_m(o_m, .) += eta * s for every observed modality m.
void accumulate_likelihood(DirichletCounts& counts, const Observation& o,
                           std::span<const double> s, double eta);

/// c_m(o_m, tau) += eta for every observed modality m (tau is a 0-based
/// preference column, clipped to the model range by the caller).
void accumulate_preferences(DirichletCounts& counts, const Observation& o,
                            int tau, double eta);

/// C = log of the column-normalized preference counts.
void refresh_preferences(PreferenceModel& prefs, const DirichletCounts& counts);

/// Carry a belief across episodes with a small leak toward uniform, so
/// stale certainty can be overturned by new evidence.
std::vector<double> drift_toward_uniform(std::span<const double> belief, double drift);

} // namespace felab
