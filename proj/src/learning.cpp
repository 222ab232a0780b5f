#include "felab/learning.hpp"

#include <cmath>

namespace felab {

void accumulate_likelihood(DirichletCounts& counts, const Observation& o,
                           std::span<const double> s, double eta) {
    if (!counts.learn_a) return;
    for (std::size_t m = 0; m < counts.a.size(); ++m) {
        if (o[m] < 0) continue;
        Matrix& a = counts.a[m];
        for (int j = 0; j < a.cols(); ++j) a(o[m], j) += eta * s[j];
    }
}

void accumulate_preferences(DirichletCounts& counts, const Observation& o,
                            int tau, double eta) {
    if (!counts.learn_c) return;
    for (std::size_t m = 0; m < counts.c.size(); ++m) {
        if (o[m] < 0) continue;
        counts.c[m](o[m], tau) += eta;
    }
}

void refresh_preferences(PreferenceModel& prefs, const DirichletCounts& counts) {
    for (std::size_t m = 0; m < counts.c.size(); ++m) {
        Matrix norm = normalize_counts(counts.c[m], "c[" + std::to_string(m) + "]");
        Matrix& lp = prefs.log_pref[m];
        for (int t = 0; t < norm.cols(); ++t) {
            for (int i = 0; i < norm.rows(); ++i) {
                lp(i, t) = std::max(log_safe(norm(i, t)), prefs.floor);
            }
        }
    }
}

std::vector<double> drift_toward_uniform(std::span<const double> belief, double drift) {
    const double u = 1.0 / static_cast<double>(belief.size());
    std::vector<double> out(belief.size());
    for (std::size_t i = 0; i < belief.size(); ++i) {
        out[i] = (1.0 - drift) * belief[i] + drift * u;
    }
    return out;
}

} // namespace felab
