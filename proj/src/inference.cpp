#include "felab/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "felab/learning.hpp"

namespace felab {

namespace {

// Deterministic transition matrices are permutations of the state space;
// applying them as index maps instead of dense products dominates the
// planner's speedup on the lake model.
struct TransOp {
    const Matrix* dense = nullptr;
    std::vector<int> next; // empty unless deterministic: column j -> row next[j]

    explicit TransOp(const Matrix& b) : dense(&b) {
        next.assign(b.cols(), -1);
        for (int j = 0; j < b.cols(); ++j) {
            for (int i = 0; i < b.rows(); ++i) {
                const double v = b(i, j);
                if (v == 0.0) continue;
                if (v == 1.0 && next[j] == -1) {
                    next[j] = i;
                } else {
                    next.clear();
                    return;
                }
            }
            if (next.empty() || next[j] == -1) {
                next.clear();
                return;
            }
        }
    }

    // y = B x
    void forward(std::span<const double> x, std::span<double> y) const {
        if (!next.empty()) {
            std::fill(y.begin(), y.end(), 0.0);
            for (std::size_t j = 0; j < x.size(); ++j) y[next[j]] += x[j];
        } else {
            dense->multiply(x, y);
        }
    }

    // y = B^T x
    void backward(std::span<const double> x, std::span<double> y) const {
        if (!next.empty()) {
            for (std::size_t j = 0; j < y.size(); ++j) y[j] = x[next[j]];
        } else {
            dense->multiply_transposed(x, y);
        }
    }
};

std::vector<TransOp> make_ops(const GenerativeModel& g) {
    std::vector<TransOp> ops;
    ops.reserve(g.B.size());
    for (const Matrix& b : g.B) ops.emplace_back(b);
    return ops;
}

void log_vector(std::span<const double> x, std::vector<double>& out) {
    out.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = log_safe(x[i]);
}

} // namespace

std::vector<double> log_likelihood(const GenerativeModel& g, const Observation& o) {
    const int n = g.states.joint_size();
    std::vector<double> ll(n, 0.0);
    for (int m = 0; m < g.num_modalities(); ++m) {
        if (o[m] < 0) continue;
        const Matrix& a = g.A[m];
        for (int j = 0; j < n; ++j) ll[j] += log_safe(a(o[m], j));
    }
    return ll;
}

PolicyBeliefs rollout_beliefs(const GenerativeModel& g, const std::vector<int>& policy,
                              std::span<const double> d, const Observation& o) {
    const int n = g.states.joint_size();
    PolicyBeliefs b;
    b.s.assign(policy.size() + 1, std::vector<double>(n));

    const std::vector<double> ll = log_likelihood(g, o);
    for (int j = 0; j < n; ++j) b.s[0][j] = d[j] * std::exp(ll[j]);
    normalize_inplace(b.s[0]);

    for (std::size_t w = 0; w < policy.size(); ++w) {
        g.B[policy[w]].multiply(b.s[w], b.s[w + 1]);
    }
    return b;
}

int update_states(const GenerativeModel& g, const std::vector<int>& policy,
                  std::span<const double> d, const Observation& o,
                  PolicyBeliefs& b, const AiConfig& cfg) {
    const int n = g.states.joint_size();
    const int W = static_cast<int>(b.s.size());
    const auto ops = make_ops(g);
    const std::vector<double> ll = log_likelihood(g, o);

    std::vector<double> ln_d(n);
    for (int j = 0; j < n; ++j) ln_d[j] = log_safe(d[j]);

    std::vector<std::vector<double>> v(W, std::vector<double>(n));
    for (int w = 0; w < W; ++w) log_vector(b.s[w], v[w]);

    const double ln_floor = std::log(kLogFloor);
    std::vector<double> msg(n), lnsum(n), tmp(n);
    int sweeps = 0;
    for (; sweeps < cfg.max_sweeps; ++sweeps) {
        double max_eps = 0.0;
        for (int w = 0; w < W; ++w) {
            if (w == 0) {
                for (int j = 0; j < n; ++j) lnsum[j] = ln_d[j] + ll[j];
            } else {
                ops[policy[w - 1]].forward(b.s[w - 1], msg);
                for (int j = 0; j < n; ++j) lnsum[j] = log_safe(msg[j]);
            }
            if (w + 1 < W) {
                ops[policy[w]].backward(b.s[w + 1], msg);
                for (int j = 0; j < n; ++j) lnsum[j] += log_safe(msg[j]);
            }
            // Centered prediction error: at the fixed point the raw error
            // is a constant vector, so the centered one vanishes. The
            // message sum is clamped at the probability floor so states
            // with vanishing support reach their fixed point too.
            double mean = 0.0;
            for (int j = 0; j < n; ++j) {
                tmp[j] = std::max(lnsum[j], ln_floor) - v[w][j];
                mean += tmp[j];
            }
            mean /= n;
            for (int j = 0; j < n; ++j) {
                const double eps = tmp[j] - mean;
                max_eps = std::max(max_eps, std::abs(eps));
                v[w][j] += eps / cfg.zeta;
            }
            b.s[w] = softmax(v[w]);
        }
        if (max_eps < cfg.conv_tol) {
            ++sweeps;
            break;
        }
    }
    return sweeps;
}

double variational_free_energy(const GenerativeModel& g, const std::vector<int>& policy,
                               std::span<const double> d, const Observation& o,
                               const PolicyBeliefs& b) {
    const int n = g.states.joint_size();
    const int W = static_cast<int>(b.s.size());
    const std::vector<double> ll = log_likelihood(g, o);

    std::vector<double> msg(n);
    double F = 0.0;
    for (int w = 0; w < W; ++w) {
        const std::vector<double>& s = b.s[w];
        if (w == 0) {
            msg.assign(d.begin(), d.end());
        } else {
            g.B[policy[w - 1]].multiply(b.s[w - 1], msg);
        }
        for (int j = 0; j < n; ++j) {
            if (s[j] <= 0.0) continue;
            double term = log_safe(s[j]) - log_safe(msg[j]);
            if (w == 0) term -= ll[j];
            F += s[j] * term;
        }
    }
    return F;
}

EFEBreakdown expected_free_energy(const GenerativeModel& g, std::span<const double> s,
                                  int tau, bool use_epistemic_route) {
    EFEBreakdown e;
    const int n = g.states.joint_size();
    std::vector<double> o;
    for (int m = 0; m < g.num_modalities(); ++m) {
        const Matrix& a = g.A[m];
        o.assign(a.rows(), 0.0);
        for (int j = 0; j < n; ++j) {
            const double sj = s[j];
            if (sj == 0.0) continue;
            for (int i = 0; i < a.rows(); ++i) o[i] += a(i, j) * sj;
        }
        const std::vector<double> pref = g.C.preferred(m, tau);

        if (use_epistemic_route) {
            // Epistemic value: expected KL between the state-conditioned
            // outcome distribution and the predicted one (mutual
            // information). Extrinsic value: expected log-preference.
            for (int j = 0; j < n; ++j) {
                if (s[j] == 0.0) continue;
                double kl = 0.0;
                for (int i = 0; i < a.rows(); ++i) {
                    const double p = a(i, j);
                    if (p > 0.0) kl += p * (log_safe(p) - log_safe(o[i]));
                }
                e.epistemic += s[j] * kl;
            }
            for (int i = 0; i < a.rows(); ++i) e.extrinsic += o[i] * log_safe(pref[i]);
        } else {
            // Risk: KL from predicted outcomes to preferred ones.
            // Ambiguity: expected outcome entropy given the state.
            for (int i = 0; i < a.rows(); ++i) {
                if (o[i] > 0.0) e.risk += o[i] * (log_safe(o[i]) - log_safe(pref[i]));
            }
            for (int j = 0; j < n; ++j) {
                if (s[j] == 0.0) continue;
                double h = 0.0;
                for (int i = 0; i < a.rows(); ++i) {
                    const double p = a(i, j);
                    if (p > 0.0) h -= p * std::log(p);
                }
                e.ambiguity += s[j] * h;
            }
        }

        if (g.counts.learn_a) {
            // Novelty of the likelihood counts: W = (1/a - 1/a0) / 2.
            const Matrix& a_cnt = g.counts.a[m];
            for (int j = 0; j < n; ++j) {
                if (s[j] == 0.0) continue;
                double col_sum = 0.0;
                for (int i = 0; i < a_cnt.rows(); ++i) col_sum += a_cnt(i, j);
                for (int i = 0; i < a_cnt.rows(); ++i) {
                    const double w_ij = 0.5 * (1.0 / a_cnt(i, j) - 1.0 / col_sum);
                    e.novelty += o[i] * w_ij * s[j];
                }
            }
        }
        if (g.counts.learn_c) {
            // Same information-gain bonus for the preference counts.
            const Matrix& c_cnt = g.counts.c[m];
            double col_sum = 0.0;
            for (int i = 0; i < c_cnt.rows(); ++i) col_sum += c_cnt(i, tau);
            for (int i = 0; i < c_cnt.rows(); ++i) {
                e.novelty += o[i] * 0.5 * (1.0 / c_cnt(i, tau) - 1.0 / col_sum);
            }
        }
    }
    return e;
}

PolicyPosterior infer_policies(std::span<const double> F, std::span<const double> G,
                               const std::vector<char>& active, const AiConfig& cfg) {
    const int n = static_cast<int>(F.size());
    PolicyPosterior out;
    out.beta = cfg.beta_prior;
    std::vector<double> logits(n);

    auto masked_softmax = [&](double gamma, bool include_F) {
        for (int p = 0; p < n; ++p) {
            logits[p] = active[p] ? -gamma * G[p] - (include_F ? F[p] : 0.0)
                                  : -std::numeric_limits<double>::infinity();
        }
        return softmax(logits);
    };

    for (int it = 0; it < cfg.precision_iters; ++it) {
        out.iterations = it + 1;
        const double gamma = 1.0 / out.beta;
        out.prior = masked_softmax(gamma, false);
        out.q = masked_softmax(gamma, true);
        double err = 0.0;
        for (int p = 0; p < n; ++p) {
            if (active[p]) err += (out.q[p] - out.prior[p]) * G[p];
        }
        const double beta_new = std::max(cfg.beta_prior + err, cfg.beta_floor);
        const double delta = std::abs(beta_new - out.beta);
        out.beta = beta_new;
        if (delta < cfg.precision_tol) break;
    }
    out.gamma = 1.0 / out.beta;
    return out;
}

void prune_policies(std::vector<double>& q, std::vector<char>& active, double ratio) {
    double q_max = 0.0;
    for (std::size_t p = 0; p < q.size(); ++p) {
        if (active[p]) q_max = std::max(q_max, q[p]);
    }
    const double cut = q_max * ratio;
    double total = 0.0;
    for (std::size_t p = 0; p < q.size(); ++p) {
        if (active[p] && q[p] < cut) active[p] = 0;
        if (!active[p]) q[p] = 0.0;
        total += q[p];
    }
    if (total <= 0.0) throw ModelError("pruning removed all policies");
    for (double& x : q) x /= total;
}

std::vector<double> bayesian_model_average(const std::vector<PolicyBeliefs>& beliefs,
                                           std::span<const double> q,
                                           const std::vector<char>& active, int w) {
    std::vector<double> avg(beliefs.front().s[w].size(), 0.0);
    for (std::size_t p = 0; p < beliefs.size(); ++p) {
        if (!active[p] || q[p] == 0.0) continue;
        const std::vector<double>& s = beliefs[p].s[w];
        for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += q[p] * s[j];
    }
    normalize_inplace(avg);
    return avg;
}

std::vector<double> action_marginal(const PolicySet& ps, std::span<const double> q,
                                    const std::vector<char>& active) {
    std::vector<double> marg(ps.num_actions, 0.0);
    for (int p = 0; p < ps.size(); ++p) {
        if (active[p]) marg[ps.seq[p][0]] += q[p];
    }
    normalize_inplace(marg);
    return marg;
}

int select_action(std::span<const double> action_probs, bool sample, Rng& rng) {
    if (sample) return rng.categorical(action_probs);
    int best = 0;
    for (std::size_t u = 1; u < action_probs.size(); ++u) {
        if (action_probs[u] > action_probs[best]) best = static_cast<int>(u);
    }
    return best;
}

// --------------------------------------------------------------------------
// Fast planning path: identical math to the reference operations above, but
// restricted to the reachable state support and deduplicated over policies
// with identical effective dynamics.
// --------------------------------------------------------------------------

struct PlannerCache {
    std::vector<TransOp> ops;
    std::vector<std::vector<double>> ambiguity; // [modality][joint state]
    std::vector<Matrix> ln_pref;                // [modality] |O_m| x T
    bool dirty = true;

    void refresh(const GenerativeModel& g) {
        ops = make_ops(g);
        const int n = g.states.joint_size();
        ambiguity.assign(g.num_modalities(), {});
        ln_pref.clear();
        for (int m = 0; m < g.num_modalities(); ++m) {
            const Matrix& a = g.A[m];
            ambiguity[m].assign(n, 0.0);
            for (int j = 0; j < n; ++j) {
                double h = 0.0;
                for (int i = 0; i < a.rows(); ++i) {
                    const double p = a(i, j);
                    if (p > 0.0) h -= p * std::log(p);
                }
                ambiguity[m][j] = h;
            }
            const Matrix& c = g.C.log_pref[m];
            Matrix lp(c.rows(), c.cols());
            for (int t = 0; t < c.cols(); ++t) {
                const std::vector<double> pref = g.C.preferred(m, t);
                for (int i = 0; i < c.rows(); ++i) lp(i, t) = log_safe(pref[i]);
            }
            ln_pref.push_back(std::move(lp));
        }
        dirty = false;
    }
};

void PlannerCacheDeleter::operator()(PlannerCache* p) const { delete p; }

PlannerCachePtr make_planner_cache() { return PlannerCachePtr(new PlannerCache()); }

StepPlan plan_step(GenerativeModel& g, const AiConfig& cfg, PlannerCache& cache,
                   std::span<const double> d, const Observation& o, int tau) {
    if (cache.dirty) cache.refresh(g);
    const int n = g.states.joint_size();
    const int depth = g.policies.depth;
    const int W = depth + 1;
    const int P = g.policies.size();
    const double ln_floor = std::log(kLogFloor);

    // Support of the prior: everything else carries negligible mass and
    // stays pinned at the probability floor during the sweeps.
    double d_max = 0.0;
    for (int j = 0; j < n; ++j) d_max = std::max(d_max, d[j]);
    std::vector<int> S0;
    for (int j = 0; j < n; ++j) {
        if (d[j] > 1e-12 * d_max) S0.push_back(j);
    }
    const int n0 = static_cast<int>(S0.size());

    const std::vector<double> ll_full = log_likelihood(g, o);
    std::vector<double> ln_d0(n0), ll0(n0);
    for (int k = 0; k < n0; ++k) {
        ln_d0[k] = log_safe(d[S0[k]]);
        ll0[k] = ll_full[S0[k]];
    }

    // Filtered posterior for the current slice. This is policy independent
    // (every rollout shares the same first-slice initialization), so it is
    // computed exactly rather than read back from the swept beliefs, whose
    // mean-field fixed point over-sharpens perfectly correlated factors.
    std::vector<double> s0_exact(n0);
    for (int k = 0; k < n0; ++k) s0_exact[k] = d[S0[k]] * std::exp(ll0[k]);
    normalize_inplace(s0_exact);

    // Group policies whose transition maps agree on the reachable support.
    std::vector<int> policy_class(P);
    std::map<std::vector<int>, int> key_to_class;
    std::vector<int> class_rep;
    std::vector<int> key, support, image;
    for (int p = 0; p < P; ++p) {
        key.clear();
        support = S0;
        for (int w = 0; w < depth; ++w) {
            const auto& next = cache.ops[g.policies.seq[p][w]].next;
            image.clear();
            for (int j : support) {
                key.push_back(next[j]);
                image.push_back(next[j]);
            }
            key.push_back(-1);
            std::sort(image.begin(), image.end());
            image.erase(std::unique(image.begin(), image.end()), image.end());
            support = image;
        }
        const auto [it, inserted] =
            key_to_class.try_emplace(key, static_cast<int>(class_rep.size()));
        if (inserted) class_rep.push_back(p);
        policy_class[p] = it->second;
    }
    const int n_classes = static_cast<int>(class_rep.size());

    std::vector<double> Fc(n_classes, 0.0), Gc(n_classes, 0.0);
    std::vector<int> pos_of(n, -1);

    for (int c = 0; c < n_classes; ++c) {
        const std::vector<int>& pol = g.policies.seq[class_rep[c]];

        std::vector<std::vector<int>> S(W);
        S[0] = S0;
        for (int w = 0; w < depth; ++w) {
            const auto& next = cache.ops[pol[w]].next;
            image.clear();
            for (int j : S[w]) image.push_back(next[j]);
            std::sort(image.begin(), image.end());
            image.erase(std::unique(image.begin(), image.end()), image.end());
            S[w + 1] = image;
        }
        // fwd_to[w][k]: position in S[w] of the image of S[w-1][k];
        // bk_to[w][j]: position in S[w+1] of the image of S[w][j].
        std::vector<std::vector<int>> fwd_to(W), bk_to(W);
        for (int w = 1; w < W; ++w) {
            for (std::size_t i = 0; i < S[w].size(); ++i) pos_of[S[w][i]] = static_cast<int>(i);
            const auto& next = cache.ops[pol[w - 1]].next;
            fwd_to[w].resize(S[w - 1].size());
            for (std::size_t k = 0; k < S[w - 1].size(); ++k) {
                fwd_to[w][k] = pos_of[next[S[w - 1][k]]];
            }
            bk_to[w - 1] = fwd_to[w]; // same map viewed from the earlier slice
            for (int j : S[w]) pos_of[j] = -1;
        }

        // Rollout initialization.
        std::vector<std::vector<double>> s(W), v(W);
        s[0] = s0_exact;
        for (int w = 1; w < W; ++w) {
            s[w].assign(S[w].size(), 0.0);
            for (std::size_t k = 0; k < S[w - 1].size(); ++k) {
                s[w][fwd_to[w][k]] += s[w - 1][k];
            }
        }
        for (int w = 0; w < W; ++w) {
            v[w].resize(s[w].size());
            for (std::size_t j = 0; j < s[w].size(); ++j) v[w][j] = log_safe(s[w][j]);
        }

        // Gradient sweeps (same scheme as update_states).
        std::vector<double> lnsum, fsum;
        for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
            double max_eps = 0.0;
            for (int w = 0; w < W; ++w) {
                const std::size_t sz = s[w].size();
                lnsum.assign(sz, 0.0);
                if (w == 0) {
                    for (std::size_t j = 0; j < sz; ++j) lnsum[j] = ln_d0[j] + ll0[j];
                } else {
                    fsum.assign(sz, 0.0);
                    for (std::size_t k = 0; k < S[w - 1].size(); ++k) {
                        fsum[fwd_to[w][k]] += s[w - 1][k];
                    }
                    for (std::size_t j = 0; j < sz; ++j) lnsum[j] = log_safe(fsum[j]);
                }
                if (w + 1 < W) {
                    for (std::size_t j = 0; j < sz; ++j) {
                        lnsum[j] += log_safe(s[w + 1][bk_to[w][j]]);
                    }
                }
                double mean = 0.0;
                for (std::size_t j = 0; j < sz; ++j) {
                    lnsum[j] = std::max(lnsum[j], ln_floor) - v[w][j];
                    mean += lnsum[j];
                }
                mean /= static_cast<double>(sz);
                for (std::size_t j = 0; j < sz; ++j) {
                    const double eps = lnsum[j] - mean;
                    max_eps = std::max(max_eps, std::abs(eps));
                    v[w][j] += eps / cfg.zeta;
                }
                s[w] = softmax(v[w]);
            }
            if (max_eps < cfg.conv_tol) break;
        }

        // Variational free energy over the window.
        double F = 0.0;
        for (std::size_t j = 0; j < s[0].size(); ++j) {
            if (s[0][j] <= 0.0) continue;
            F += s[0][j] * (log_safe(s[0][j]) - ln_d0[j] - ll0[j]);
        }
        for (int w = 1; w < W; ++w) {
            fsum.assign(s[w].size(), 0.0);
            for (std::size_t k = 0; k < S[w - 1].size(); ++k) {
                fsum[fwd_to[w][k]] += s[w - 1][k];
            }
            for (std::size_t j = 0; j < s[w].size(); ++j) {
                if (s[w][j] <= 0.0) continue;
                F += s[w][j] * (log_safe(s[w][j]) - log_safe(fsum[j]));
            }
        }
        Fc[c] = F;

        // Expected free energy over the future slices.
        double G = 0.0;
        std::vector<double> om;
        for (int w = 1; w < W; ++w) {
            const int col = std::min(tau + w, g.horizon) - 1;
            for (int m = 0; m < g.num_modalities(); ++m) {
                const Matrix& a = g.A[m];
                om.assign(a.rows(), 0.0);
                for (std::size_t j = 0; j < S[w].size(); ++j) {
                    const double sj = s[w][j];
                    const int jj = S[w][j];
                    for (int i = 0; i < a.rows(); ++i) om[i] += a(i, jj) * sj;
                }
                for (int i = 0; i < a.rows(); ++i) {
                    if (om[i] > 0.0) {
                        G += om[i] * (log_safe(om[i]) - cache.ln_pref[m](i, col));
                    }
                }
                for (std::size_t j = 0; j < S[w].size(); ++j) {
                    G += s[w][j] * cache.ambiguity[m][S[w][j]];
                }
                if (g.counts.learn_a) {
                    const Matrix& a_cnt = g.counts.a[m];
                    for (std::size_t j = 0; j < S[w].size(); ++j) {
                        const int jj = S[w][j];
                        double col_sum = 0.0;
                        for (int i = 0; i < a_cnt.rows(); ++i) col_sum += a_cnt(i, jj);
                        for (int i = 0; i < a_cnt.rows(); ++i) {
                            G -= om[i] * s[w][j] * 0.5 * (1.0 / a_cnt(i, jj) - 1.0 / col_sum);
                        }
                    }
                }
                if (g.counts.learn_c) {
                    const Matrix& c_cnt = g.counts.c[m];
                    double col_sum = 0.0;
                    for (int i = 0; i < c_cnt.rows(); ++i) col_sum += c_cnt(i, col);
                    for (int i = 0; i < c_cnt.rows(); ++i) {
                        G -= om[i] * 0.5 * (1.0 / c_cnt(i, col) - 1.0 / col_sum);
                    }
                }
            }
        }
        Gc[c] = G;
    }

    StepPlan plan;
    plan.F.resize(P);
    plan.G.resize(P);
    for (int p = 0; p < P; ++p) {
        plan.F[p] = Fc[policy_class[p]];
        plan.G[p] = Gc[policy_class[p]];
    }

    g.policies.reset_active();
    plan.post = infer_policies(plan.F, plan.G, g.policies.active, cfg);
    prune_policies(plan.post.q, g.policies.active, cfg.prune_ratio);
    plan.action_probs = action_marginal(g.policies, plan.post.q, g.policies.active);

    plan.s_now.assign(n, 0.0);
    for (int k = 0; k < n0; ++k) plan.s_now[S0[k]] = s0_exact[k];
    return plan;
}

ActiveInferenceAgent::ActiveInferenceAgent(GenerativeModel model, AiConfig cfg, std::string id)
    : base_(std::move(model)), g_(base_), cfg_(cfg), id_(std::move(id)),
      context_belief_(base_.D[1]), cache_(make_planner_cache()) {}

ActiveInferenceAgent::~ActiveInferenceAgent() = default;

void ActiveInferenceAgent::begin_trial() {
    g_ = base_;
    context_belief_ = g_.D[1];
    cache_->dirty = true;
}

AgentTrace ActiveInferenceAgent::run_episode(FrozenLakeEnv& env, Rng& rng, int episode,
                                             bool record_diag) {
    env.reset(episode);
    AgentTrace trace;

    const int n_loc = g_.states.factor(0).size;
    const int horizon = g_.horizon;

    // Episode prior: known start location; carried (and slightly leaked)
    // or reset context belief.
    std::vector<std::vector<double>> d_factors(2);
    d_factors[0].assign(n_loc, 0.0);
    d_factors[0][env.position() - 1] = 1.0;
    d_factors[1] = cfg_.carry_context
                       ? drift_toward_uniform(context_belief_, cfg_.context_drift)
                       : base_.D[1];
    std::vector<double> d = g_.states.outer(d_factors);

    int tau = 1; // 1-based observed timestep; tau = 1 is the start observation
    Observation o{env.position() - 1, env.observe_score()};
    trace.positions.push_back(env.position());
    trace.score_outcomes.push_back(o[1]);

    // (tau, observation, state posterior) triples for end-of-episode learning.
    struct Seen { int tau; Observation o; std::vector<double> s; };
    std::vector<Seen> seen;
    const bool learning = g_.counts.learn_a || g_.counts.learn_c;

    auto record_observation = [&](const Observation& obs, const std::vector<double>& s, int t) {
        if (!learning) return;
        const int col = std::min(t, horizon) - 1;
        if (cfg_.online_learning) {
            accumulate_likelihood(g_.counts, obs, s, cfg_.eta);
            accumulate_preferences(g_.counts, obs, col, cfg_.eta);
            if (g_.counts.learn_a) g_.refresh_expected_likelihood();
            if (g_.counts.learn_c) refresh_preferences(g_.C, g_.counts);
            cache_->dirty = true;
        } else {
            seen.push_back({t, obs, s});
        }
    };

    while (!env.terminal()) {
        // Learn from the received observation before planning, so the novelty
        // bonus already discounts the current cell on the very first step.
        {
            std::vector<double> s_obs(d.size());
            const std::vector<double> ll = log_likelihood(g_, o);
            for (std::size_t j = 0; j < d.size(); ++j) s_obs[j] = d[j] * std::exp(ll[j]);
            normalize_inplace(s_obs);
            record_observation(o, s_obs, tau);
        }
        StepPlan plan = plan_step(g_, cfg_, *cache_, d, o, tau);

        const int u = select_action(plan.action_probs, cfg_.sample_actions, rng);

        if (record_diag) {
            StepDiag diag;
            diag.episode = episode;
            diag.tau = tau;
            diag.action = u;
            diag.gamma = plan.post.gamma;
            diag.q_entropy = entropy(plan.post.q);
            diag.free_energy = dot(plan.post.q, plan.F);
            diag.G = plan.G;
            trace.diag.push_back(std::move(diag));
        }
        const std::vector<double>& s_now = plan.s_now;

        const StepResult step = env.step(static_cast<Action>(u));
        trace.actions.push_back(u);
        trace.positions.push_back(step.position);
        trace.score_outcomes.push_back(step.score_outcome);
        trace.shaped_return += step.reward;

        g_.B[u].multiply(s_now, d);
        normalize_inplace(d);
        o = {step.position - 1, step.score_outcome};
        ++tau;
    }

    // Exact single-step posterior for the final observation.
    std::vector<double> s_final(d.size());
    const std::vector<double> ll = log_likelihood(g_, o);
    for (std::size_t j = 0; j < d.size(); ++j) s_final[j] = d[j] * std::exp(ll[j]);
    normalize_inplace(s_final);
    record_observation(o, s_final, tau);

    if (learning && !cfg_.online_learning) {
        for (const Seen& e : seen) {
            accumulate_likelihood(g_.counts, e.o, e.s, cfg_.eta);
            accumulate_preferences(g_.counts, e.o, std::min(e.tau, horizon) - 1, cfg_.eta);
        }
        if (g_.counts.learn_a) g_.refresh_expected_likelihood();
        if (g_.counts.learn_c) refresh_preferences(g_.C, g_.counts);
        cache_->dirty = true;
    }

    context_belief_ = g_.states.marginal(s_final, 1);

    trace.moves = env.moves();
    trace.goal_reached = env.goal_reached();
    trace.score = env.episode_score();
    return trace;
}

} // namespace felab
