#pragma once

// HTK-style monoviseme recognizer: flat-start GMM-HMMs, embedded
// Baum-Welch over transcript-concatenated models, mixture splitting and
// token-passing Viterbi decoding. All probability math in the log domain.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsr/features.hpp"

namespace vsr {

inline constexpr double kLogZero = -1e30;

inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b <= kLogZero / 2) return a;
    return a + std::log1p(std::exp(b - a));
}

struct GaussianMixture {
    std::vector<double> weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::VectorXd> vars;  // diagonal

    int n_components() const { return static_cast<int>(weights.size()); }
    int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
};

inline double gaussian_logpdf_diag(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& mean,
                                   const Eigen::VectorXd& var) {
    double d = static_cast<double>(x.size());
    double acc = -0.5 * d * std::log(2 * M_PI);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double diff = x(i) - mean(i);
        acc -= 0.5 * (std::log(var(i)) + diff * diff / var(i));
    }
    return acc;
}

inline double gmm_logpdf(const GaussianMixture& mix, const Eigen::VectorXd& x) {
    if (mix.dim() != x.size())
        throw std::invalid_argument("gmm_logpdf: dimension mismatch");
    double acc = kLogZero;
    for (int k = 0; k < mix.n_components(); ++k)
        acc = log_add(acc, std::log(mix.weights[k]) +
                               gaussian_logpdf_diag(x, mix.means[k],
                                                    mix.vars[k]));
    return acc;
}

// 3 emitting states plus entry/exit; transition matrix is
// (n+2)x(n+2) over {entry, s1..sn, exit}, rows over allowed entries sum 1.
struct HmmModel {
    std::string label;
    std::vector<GaussianMixture> states;
    Eigen::MatrixXd trans;                      // probabilities
    std::vector<std::vector<uint8_t>> allowed;  // topology mask

    int n_states() const { return static_cast<int>(states.size()); }
    int entry() const { return 0; }
    int exit() const { return n_states() + 1; }

    // Minimal number of frames needed to traverse the model.
    int min_path() const {
        // BFS over allowed transitions counting emitting states
        int n = n_states();
        std::vector<int> best(n + 2, 1 << 20);
        best[0] = 0;
        for (int pass = 0; pass < n + 2; ++pass)
            for (int i = 0; i <= n + 1; ++i)
                for (int j = 0; j <= n + 1; ++j)
                    if (allowed[i][j]) {
                        int cost = (j >= 1 && j <= n) ? 1 : 0;
                        best[j] = std::min(best[j], best[i] + cost);
                    }
        return best[n + 1];
    }
};

struct HmmSet {
    std::vector<HmmModel> models;  // deterministic label order
    int dim = 0;
    std::string silence_label = "sil";
    std::vector<int> mixture_schedule_done;
    std::vector<double> loglik_history;
    Eigen::VectorXd var_floor;  // per-dim

    int find(const std::string& label) const {
        for (size_t i = 0; i < models.size(); ++i)
            if (models[i].label == label) return static_cast<int>(i);
        return -1;
    }
};

using Transcript = std::vector<std::string>;

struct HmmCorpus {
    std::vector<FeatureSequence> features;
    std::vector<Transcript> transcripts;
};

namespace detail {

inline Eigen::VectorXd frame_vec(const FeatureSequence& seq, size_t t) {
    return Eigen::Map<const Eigen::VectorXd>(
        seq.frames[t].data(), static_cast<Eigen::Index>(seq.frames[t].size()));
}

inline void normalize_rows(HmmModel& m) {
    int n = m.n_states();
    for (int i = 0; i <= n + 1; ++i) {
        double row = 0;
        for (int j = 0; j <= n + 1; ++j) {
            if (!m.allowed[i][j]) m.trans(i, j) = 0.0;
            row += m.trans(i, j);
        }
        if (row > 0)
            for (int j = 0; j <= n + 1; ++j) m.trans(i, j) /= row;
    }
}

}  // namespace detail

// Global-mean/variance initialization: every state of every model gets one
// Gaussian at the corpus statistics; silence gets skip and backward
// transitions.
inline HmmSet flat_start(const HmmCorpus& corpus, int n_states = 3,
                         const std::string& silence_label = "sil") {
    if (corpus.features.empty())
        throw std::invalid_argument("flat_start: empty corpus");
    int dim = corpus.features[0].dim;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
    size_t n = 0;
    for (const auto& seq : corpus.features) {
        if (seq.dim != dim)
            throw std::invalid_argument("flat_start: inconsistent feature dims");
        for (size_t t = 0; t < seq.size(); ++t) {
            Eigen::VectorXd x = detail::frame_vec(seq, t);
            mean += x;
            sq += x.cwiseProduct(x);
            ++n;
        }
    }
    mean /= static_cast<double>(n);
    Eigen::VectorXd var = sq / static_cast<double>(n) - mean.cwiseProduct(mean);

    HmmSet set;
    set.dim = dim;
    set.silence_label = silence_label;
    set.var_floor = (1e-4 * var.cwiseMax(1e-20)).cwiseMax(1e-10);
    bool floored = false;
    for (Eigen::Index i = 0; i < dim; ++i)
        if (var(i) < set.var_floor(i)) {
            var(i) = set.var_floor(i);
            floored = true;
        }
    if (floored)
        std::cerr << "flat_start: warning: zero-variance dims floored\n";

    std::vector<std::string> labels;
    for (const auto& tr : corpus.transcripts)
        for (const auto& l : tr)
            if (std::find(labels.begin(), labels.end(), l) == labels.end())
                labels.push_back(l);
    std::sort(labels.begin(), labels.end());

    for (const auto& label : labels) {
        HmmModel m;
        m.label = label;
        GaussianMixture g;
        g.weights = {1.0};
        g.means = {mean};
        g.vars = {var};
        m.states.assign(n_states, g);
        int s = n_states;
        m.allowed.assign(s + 2, std::vector<uint8_t>(s + 2, 0));
        m.allowed[0][1] = 1;  // entry -> s1
        for (int i = 1; i <= s; ++i) {
            m.allowed[i][i] = 1;
            m.allowed[i][i + 1] = 1;  // next state or exit
        }
        bool silence = label == silence_label && s >= 3;
        if (silence) {
            m.allowed[1][3] = 1;  // skip
            m.allowed[3][1] = 1;  // backward
        }
        m.trans = Eigen::MatrixXd::Zero(s + 2, s + 2);
        for (int i = 0; i <= s + 1; ++i) {
            int cnt = 0;
            for (int j = 0; j <= s + 1; ++j) cnt += m.allowed[i][j];
            for (int j = 0; j <= s + 1; ++j)
                if (m.allowed[i][j]) m.trans(i, j) = 1.0 / cnt;
        }
        if (silence) {
            // special transitions start at 0.1, remainder renormalized
            m.trans(1, 3) = 0.1;
            m.trans(1, 1) = 0.45;
            m.trans(1, 2) = 0.45;
            m.trans(3, 1) = 0.1;
            m.trans(3, 3) = 0.45;
            m.trans(3, 4) = 0.45;
        }
        detail::normalize_rows(m);
        set.models.push_back(std::move(m));
    }
    return set;
}

namespace detail {

// Composite sentence graph over emitting states of the transcript's model
// chain.
struct CompositeGraph {
    std::vector<int> model_of;  // composite state -> model index in set
    std::vector<int> token_of;  // composite state -> transcript position
    std::vector<int> state_of;  // composite state -> local emitting state 1..n
    std::vector<double> log_init;
    std::vector<double> log_final;
    std::vector<std::vector<std::pair<int, double>>> in_arcs;   // (src, logp)
    std::vector<std::vector<std::pair<int, double>>> out_arcs;  // (dst, logp)
    int n = 0;
};

inline CompositeGraph build_composite(const HmmSet& set,
                                      const Transcript& transcript) {
    CompositeGraph g;
    std::vector<int> midx;
    for (const auto& label : transcript) {
        int mi = set.find(label);
        if (mi < 0)
            throw std::invalid_argument("embedded training: unknown label " +
                                        label);
        midx.push_back(mi);
    }
    std::vector<int> base;
    for (size_t tok = 0; tok < midx.size(); ++tok) {
        const HmmModel& m = set.models[midx[tok]];
        base.push_back(g.n);
        for (int s = 1; s <= m.n_states(); ++s) {
            g.model_of.push_back(midx[tok]);
            g.token_of.push_back(static_cast<int>(tok));
            g.state_of.push_back(s);
            ++g.n;
        }
    }
    g.log_init.assign(g.n, kLogZero);
    g.log_final.assign(g.n, kLogZero);
    g.in_arcs.resize(g.n);
    g.out_arcs.resize(g.n);

    auto lp = [](double p) { return p > 0 ? std::log(p) : kLogZero; };

    for (size_t tok = 0; tok < midx.size(); ++tok) {
        const HmmModel& m = set.models[midx[tok]];
        int nb = base[tok];
        int ns = m.n_states();
        if (tok == 0)
            for (int j = 1; j <= ns; ++j)
                if (m.allowed[0][j]) g.log_init[nb + j - 1] = lp(m.trans(0, j));
        if (tok + 1 == midx.size())
            for (int i = 1; i <= ns; ++i)
                if (m.allowed[i][ns + 1])
                    g.log_final[nb + i - 1] = lp(m.trans(i, ns + 1));
        for (int i = 1; i <= ns; ++i)
            for (int j = 1; j <= ns; ++j)
                if (m.allowed[i][j] && m.trans(i, j) > 0) {
                    g.out_arcs[nb + i - 1].push_back(
                        {nb + j - 1, lp(m.trans(i, j))});
                    g.in_arcs[nb + j - 1].push_back(
                        {nb + i - 1, lp(m.trans(i, j))});
                }
        if (tok + 1 < midx.size()) {
            const HmmModel& nm = set.models[midx[tok + 1]];
            int nnb = base[tok + 1];
            for (int i = 1; i <= ns; ++i) {
                if (!m.allowed[i][ns + 1] || m.trans(i, ns + 1) <= 0) continue;
                for (int j = 1; j <= nm.n_states(); ++j) {
                    if (!nm.allowed[0][j] || nm.trans(0, j) <= 0) continue;
                    double p = lp(m.trans(i, ns + 1)) + lp(nm.trans(0, j));
                    g.out_arcs[base[tok] + i - 1].push_back({nnb + j - 1, p});
                    g.in_arcs[nnb + j - 1].push_back({base[tok] + i - 1, p});
                }
            }
        }
    }
    return g;
}

struct ReestimateAccumulators {
    // per model: state -> component -> occupancy, x, x^2
    struct StateAcc {
        std::vector<double> occ;
        std::vector<Eigen::VectorXd> x;
        std::vector<Eigen::VectorXd> x2;
    };
    std::vector<std::vector<StateAcc>> state;  // [model][state-1]
    std::vector<Eigen::MatrixXd> trans;        // [model] (n+2)x(n+2)
};

}  // namespace detail

struct ReestimateResult {
    HmmSet set;
    std::vector<double> loglik_per_iter;  // corpus total per iteration
    int skipped_sentences = 0;
};

// Embedded Baum-Welch: forward-backward over transcript-concatenated
// models, with variance flooring at re-estimation.
inline ReestimateResult embedded_reestimate(const HmmSet& input,
                                            const HmmCorpus& corpus,
                                            int n_iters = 5) {
    if (corpus.features.size() != corpus.transcripts.size())
        throw std::invalid_argument(
            "embedded_reestimate: features/transcripts mismatch");
    ReestimateResult out;
    out.set = input;

    for (int iter = 0; iter < n_iters; ++iter) {
        HmmSet& set = out.set;
        detail::ReestimateAccumulators acc;
        acc.state.resize(set.models.size());
        acc.trans.resize(set.models.size());
        for (size_t mi = 0; mi < set.models.size(); ++mi) {
            const HmmModel& m = set.models[mi];
            acc.state[mi].resize(m.n_states());
            for (int s = 0; s < m.n_states(); ++s) {
                int K = m.states[s].n_components();
                acc.state[mi][s].occ.assign(K, 0.0);
                acc.state[mi][s].x.assign(K, Eigen::VectorXd::Zero(set.dim));
                acc.state[mi][s].x2.assign(K, Eigen::VectorXd::Zero(set.dim));
            }
            acc.trans[mi] = Eigen::MatrixXd::Zero(m.n_states() + 2,
                                                  m.n_states() + 2);
        }

        double total_ll = 0;
        int used = 0;
        out.skipped_sentences = 0;
        for (size_t u = 0; u < corpus.features.size(); ++u) {
            const FeatureSequence& seq = corpus.features[u];
            const Transcript& tr = corpus.transcripts[u];
            if (tr.empty()) continue;
            auto g = detail::build_composite(set, tr);
            int T = static_cast<int>(seq.size());
            int min_len = 0;
            for (const auto& label : tr)
                min_len += set.models[set.find(label)].min_path();
            if (T < min_len) {
                ++out.skipped_sentences;
                std::cerr << "embedded_reestimate: sentence " << u
                          << " shorter than its model chain, skipped\n";
                continue;
            }

            // emission log-likelihoods
            Eigen::MatrixXd logb(T, g.n);
            for (int t = 0; t < T; ++t) {
                Eigen::VectorXd x = detail::frame_vec(seq, t);
                for (int s = 0; s < g.n; ++s)
                    logb(t, s) = gmm_logpdf(
                        set.models[g.model_of[s]].states[g.state_of[s] - 1], x);
            }

            Eigen::MatrixXd alpha(T, g.n), beta(T, g.n);
            for (int s = 0; s < g.n; ++s)
                alpha(0, s) = g.log_init[s] + logb(0, s);
            for (int t = 1; t < T; ++t)
                for (int s = 0; s < g.n; ++s) {
                    double a = kLogZero;
                    for (auto& [src, lp] : g.in_arcs[s])
                        a = log_add(a, alpha(t - 1, src) + lp);
                    alpha(t, s) = a + logb(t, s);
                }
            double ll = kLogZero;
            for (int s = 0; s < g.n; ++s)
                ll = log_add(ll, alpha(T - 1, s) + g.log_final[s]);
            if (ll <= kLogZero / 2) {
                ++out.skipped_sentences;
                std::cerr << "embedded_reestimate: sentence " << u
                          << " has zero path probability, skipped\n";
                continue;
            }
            for (int s = 0; s < g.n; ++s) beta(T - 1, s) = g.log_final[s];
            for (int t = T - 2; t >= 0; --t)
                for (int s = 0; s < g.n; ++s) {
                    double b = kLogZero;
                    for (auto& [dst, lp] : g.out_arcs[s])
                        b = log_add(b, lp + logb(t + 1, dst) + beta(t + 1, dst));
                    beta(t, s) = b;
                }
            total_ll += ll;
            ++used;

            // state/component occupancy
            for (int t = 0; t < T; ++t) {
                Eigen::VectorXd x = detail::frame_vec(seq, t);
                Eigen::VectorXd x2 = x.cwiseProduct(x);
                for (int s = 0; s < g.n; ++s) {
                    double lg = alpha(t, s) + beta(t, s) - ll;
                    if (lg < -40) continue;
                    double gamma = std::exp(lg);
                    const GaussianMixture& mix =
                        set.models[g.model_of[s]].states[g.state_of[s] - 1];
                    auto& sa = acc.state[g.model_of[s]][g.state_of[s] - 1];
                    if (mix.n_components() == 1) {
                        sa.occ[0] += gamma;
                        sa.x[0] += gamma * x;
                        sa.x2[0] += gamma * x2;
                    } else {
                        double denom = logb(t, s);
                        for (int k = 0; k < mix.n_components(); ++k) {
                            double lk =
                                std::log(mix.weights[k]) +
                                gaussian_logpdf_diag(x, mix.means[k],
                                                     mix.vars[k]) -
                                denom;
                            double gk = gamma * std::exp(std::min(lk, 0.0));
                            sa.occ[k] += gk;
                            sa.x[k] += gk * x;
                            sa.x2[k] += gk * x2;
                        }
                    }
                }
            }

            // transition accumulation
            auto model_trans = [&](int mi) -> Eigen::MatrixXd& {
                return acc.trans[mi];
            };
            for (int s = 0; s < g.n; ++s) {
                // entry occupation of the first token
                if (g.log_init[s] > kLogZero / 2) {
                    double lg = alpha(0, s) + beta(0, s) - ll;
                    if (lg > -40)
                        model_trans(g.model_of[s])(0, g.state_of[s]) +=
                            std::exp(lg);
                }
                // final exits
                if (g.log_final[s] > kLogZero / 2) {
                    double lg = alpha(T - 1, s) + g.log_final[s] - ll;
                    if (lg > -40)
                        model_trans(g.model_of[s])(
                            g.state_of[s],
                            set.models[g.model_of[s]].n_states() + 1) +=
                            std::exp(lg);
                }
            }
            for (int t = 0; t + 1 < T; ++t)
                for (int s = 0; s < g.n; ++s) {
                    if (alpha(t, s) <= kLogZero / 2) continue;
                    for (auto& [dst, lp] : g.out_arcs[s]) {
                        double lxi = alpha(t, s) + lp + logb(t + 1, dst) +
                                     beta(t + 1, dst) - ll;
                        if (lxi < -40) continue;
                        double xi = std::exp(lxi);
                        int mi = g.model_of[s];
                        if (g.token_of[s] == g.token_of[dst]) {
                            model_trans(mi)(g.state_of[s], g.state_of[dst]) +=
                                xi;
                        } else {
                            model_trans(mi)(g.state_of[s],
                                            set.models[mi].n_states() + 1) += xi;
                            model_trans(g.model_of[dst])(0, g.state_of[dst]) +=
                                xi;
                        }
                    }
                }
        }

        if (used == 0)
            throw std::runtime_error(
                "embedded_reestimate: every sentence was skipped");
        out.loglik_per_iter.push_back(total_ll);

        // M-step
        for (size_t mi = 0; mi < set.models.size(); ++mi) {
            HmmModel& m = set.models[mi];
            for (int s = 0; s < m.n_states(); ++s) {
                GaussianMixture& mix = m.states[s];
                auto& sa = acc.state[mi][s];
                double tot = 0;
                for (double o : sa.occ) tot += o;
                if (tot <= 1e-8) continue;  // unseen state keeps old params
                for (int k = 0; k < mix.n_components(); ++k) {
                    if (sa.occ[k] <= 1e-8) continue;
                    mix.weights[k] = sa.occ[k] / tot;
                    mix.means[k] = sa.x[k] / sa.occ[k];
                    Eigen::VectorXd v =
                        sa.x2[k] / sa.occ[k] -
                        mix.means[k].cwiseProduct(mix.means[k]);
                    mix.vars[k] = v.cwiseMax(set.var_floor);
                }
                double wsum = 0;
                for (double w : mix.weights) wsum += w;
                for (auto& w : mix.weights) w /= wsum;
            }
            for (int i = 0; i <= m.n_states() + 1; ++i) {
                double row = acc.trans[mi].row(i).sum();
                if (row <= 1e-12) continue;
                for (int j = 0; j <= m.n_states() + 1; ++j)
                    m.trans(i, j) =
                        m.allowed[i][j] ? acc.trans[mi](i, j) / row : 0.0;
            }
            detail::normalize_rows(m);
        }
    }
    out.set.loglik_history.insert(out.set.loglik_history.end(),
                                  out.loglik_per_iter.begin(),
                                  out.loglik_per_iter.end());
    return out;
}

// Binary mixture splitting toward the target: duplicate the heaviest
// component, perturb means by +-0.2 sigma, halve the weight.
inline HmmSet split_mixtures(const HmmSet& input, int target_components,
                             int max_components = 20) {
    if (target_components > max_components)
        throw std::invalid_argument("split_mixtures: target above ceiling " +
                                    std::to_string(max_components));
    HmmSet set = input;
    for (auto& m : set.models)
        for (auto& mix : m.states) {
            if (target_components < mix.n_components())
                throw std::invalid_argument(
                    "split_mixtures: target below current component count");
            while (mix.n_components() < target_components) {
                int best = 0;
                for (int k = 1; k < mix.n_components(); ++k)
                    if (mix.weights[k] > mix.weights[best]) best = k;
                Eigen::VectorXd sigma = mix.vars[best].cwiseSqrt();
                Eigen::VectorXd m1 = mix.means[best] + 0.2 * sigma;
                Eigen::VectorXd m2 = mix.means[best] - 0.2 * sigma;
                double w = mix.weights[best] / 2;
                mix.weights[best] = w;
                mix.means[best] = m1;
                mix.weights.push_back(w);
                mix.means.push_back(m2);
                mix.vars.push_back(mix.vars[best]);
            }
        }
    set.mixture_schedule_done.push_back(target_components);
    return set;
}

// Token-passing Viterbi over the loop of models; uniform class priors, a
// per-model-entry insertion penalty, ties broken toward the lower model
// index.
inline Transcript viterbi_decode(const HmmSet& set,
                                 const FeatureSequence& features,
                                 double insertion_penalty = 0.0) {
    if (features.size() == 0) return {};
    if (features.dim != set.dim)
        throw std::invalid_argument("viterbi_decode: dimension mismatch");
    int T = static_cast<int>(features.size());

    // flat state table across models
    struct StateRef {
        int model;
        int state;  // 1..n
    };
    std::vector<StateRef> states;
    std::vector<int> base(set.models.size());
    for (size_t mi = 0; mi < set.models.size(); ++mi) {
        base[mi] = static_cast<int>(states.size());
        for (int s = 1; s <= set.models[mi].n_states(); ++s)
            states.push_back({static_cast<int>(mi), s});
    }
    int S = static_cast<int>(states.size());
    auto lp = [](double p) { return p > 0 ? std::log(p) : kLogZero; };

    std::vector<std::vector<double>> delta(T, std::vector<double>(S, kLogZero));
    std::vector<std::vector<int>> back(T, std::vector<int>(S, -1));
    // history: model-instance id chain for label recovery
    struct Hist {
        int prev = -1;
        int model = -1;
    };
    std::vector<Hist> hist;
    std::vector<std::vector<int>> hist_id(T, std::vector<int>(S, -1));

    Eigen::MatrixXd logb(T, S);
    for (int t = 0; t < T; ++t) {
        Eigen::VectorXd x = detail::frame_vec(features, t);
        for (int s = 0; s < S; ++s)
            logb(t, s) = gmm_logpdf(
                set.models[states[s].model].states[states[s].state - 1], x);
    }

    for (size_t mi = 0; mi < set.models.size(); ++mi) {
        const HmmModel& m = set.models[mi];
        for (int j = 1; j <= m.n_states(); ++j) {
            if (!m.allowed[0][j] || m.trans(0, j) <= 0) continue;
            int s = base[mi] + j - 1;
            delta[0][s] = lp(m.trans(0, j)) + logb(0, s) - insertion_penalty;
            hist.push_back({-1, static_cast<int>(mi)});
            hist_id[0][s] = static_cast<int>(hist.size()) - 1;
        }
    }

    for (int t = 1; t < T; ++t) {
        // best exiting token at t-1
        double best_exit = kLogZero;
        int best_exit_state = -1;
        for (int s = 0; s < S; ++s) {
            if (delta[t - 1][s] <= kLogZero / 2) continue;
            const HmmModel& m = set.models[states[s].model];
            int i = states[s].state;
            if (m.allowed[i][m.n_states() + 1] &&
                m.trans(i, m.n_states() + 1) > 0) {
                double v = delta[t - 1][s] + lp(m.trans(i, m.n_states() + 1));
                if (v > best_exit) {
                    best_exit = v;
                    best_exit_state = s;
                }
            }
        }
        for (int s = 0; s < S; ++s) {
            const HmmModel& m = set.models[states[s].model];
            int j = states[s].state;
            double best = kLogZero;
            int best_src = -1;
            bool entered = false;
            // within-model predecessors
            for (int i = 1; i <= m.n_states(); ++i) {
                if (!m.allowed[i][j] || m.trans(i, j) <= 0) continue;
                int src = base[states[s].model] + i - 1;
                if (delta[t - 1][src] <= kLogZero / 2) continue;
                double v = delta[t - 1][src] + lp(m.trans(i, j));
                if (v > best) {
                    best = v;
                    best_src = src;
                    entered = false;
                }
            }
            // model (re-)entry from the best exit
            if (best_exit_state >= 0 && m.allowed[0][j] && m.trans(0, j) > 0) {
                double v = best_exit + lp(m.trans(0, j)) - insertion_penalty;
                if (v > best) {
                    best = v;
                    best_src = best_exit_state;
                    entered = true;
                }
            }
            if (best_src < 0) continue;
            delta[t][s] = best + logb(t, s);
            back[t][s] = best_src;
            if (entered) {
                hist.push_back(
                    {hist_id[t - 1][best_src], states[s].model});
                hist_id[t][s] = static_cast<int>(hist.size()) - 1;
            } else {
                hist_id[t][s] = hist_id[t - 1][best_src];
            }
        }
    }

    double best = kLogZero;
    int best_s = -1;
    for (int s = 0; s < S; ++s) {
        if (delta[T - 1][s] <= kLogZero / 2) continue;
        const HmmModel& m = set.models[states[s].model];
        int i = states[s].state;
        if (!m.allowed[i][m.n_states() + 1] ||
            m.trans(i, m.n_states() + 1) <= 0)
            continue;
        double v = delta[T - 1][s] + lp(m.trans(i, m.n_states() + 1));
        if (v > best) {
            best = v;
            best_s = s;
        }
    }
    if (best_s < 0) return {};

    std::vector<int> chain;
    for (int h = hist_id[T - 1][best_s]; h >= 0; h = hist[h].prev)
        chain.push_back(hist[h].model);
    std::reverse(chain.begin(), chain.end());
    Transcript out;
    for (int mi : chain) out.push_back(set.models[mi].label);
    return out;
}

// --- transcripts (master-label-file-like: one sentence per line) ---

inline std::vector<Transcript> read_transcripts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<Transcript> out;
    std::string line;
    while (std::getline(in, line)) {
        Transcript tr;
        std::stringstream ss(line);
        std::string tok;
        while (ss >> tok) tr.push_back(tok);
        if (!tr.empty()) out.push_back(std::move(tr));
    }
    return out;
}

inline void write_transcripts(const std::string& path,
                              const std::vector<Transcript>& trs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& tr : trs) {
        for (size_t i = 0; i < tr.size(); ++i) {
            if (i) out << ' ';
            out << tr[i];
        }
        out << '\n';
    }
}

// --- model file: readable text dump, version 1 ---

inline void save_hmm_set(const std::string& path, const HmmSet& set) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[40];
    auto g17 = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "hmmset version 1\n";
    out << "dim " << set.dim << "\n";
    out << "silence " << set.silence_label << "\n";
    out << "models " << set.models.size() << "\n";
    out << "varfloor";
    for (Eigen::Index i = 0; i < set.var_floor.size(); ++i)
        out << ' ' << g17(set.var_floor(i));
    out << "\n";
    for (const auto& m : set.models) {
        out << "model " << m.label << " states " << m.n_states() << "\n";
        for (int i = 0; i <= m.n_states() + 1; ++i) {
            out << "trans";
            for (int j = 0; j <= m.n_states() + 1; ++j)
                out << ' ' << g17(m.trans(i, j));
            out << "\n";
        }
        for (const auto& mix : m.states) {
            out << "state components " << mix.n_components() << "\n";
            for (int k = 0; k < mix.n_components(); ++k) {
                out << "weight " << g17(mix.weights[k]) << "\n";
                out << "mean";
                for (Eigen::Index i = 0; i < mix.means[k].size(); ++i)
                    out << ' ' << g17(mix.means[k](i));
                out << "\nvar";
                for (Eigen::Index i = 0; i < mix.vars[k].size(); ++i)
                    out << ' ' << g17(mix.vars[k](i));
                out << "\n";
            }
        }
    }
}

inline HmmSet load_hmm_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string tok;
    HmmSet set;
    auto expect = [&](const std::string& want) {
        in >> tok;
        if (tok != want)
            throw std::runtime_error(path + ": expected '" + want + "' got '" +
                                     tok + "'");
    };
    expect("hmmset");
    expect("version");
    int ver;
    in >> ver;
    if (ver != 1) throw std::runtime_error(path + ": unsupported version");
    expect("dim");
    in >> set.dim;
    expect("silence");
    in >> set.silence_label;
    expect("models");
    size_t n_models;
    in >> n_models;
    expect("varfloor");
    set.var_floor.resize(set.dim);
    for (int i = 0; i < set.dim; ++i) in >> set.var_floor(i);
    for (size_t mi = 0; mi < n_models; ++mi) {
        expect("model");
        HmmModel m;
        in >> m.label;
        expect("states");
        int ns;
        in >> ns;
        m.trans = Eigen::MatrixXd::Zero(ns + 2, ns + 2);
        for (int i = 0; i <= ns + 1; ++i) {
            expect("trans");
            for (int j = 0; j <= ns + 1; ++j) in >> m.trans(i, j);
        }
        m.allowed.assign(ns + 2, std::vector<uint8_t>(ns + 2, 0));
        for (int i = 0; i <= ns + 1; ++i)
            for (int j = 0; j <= ns + 1; ++j)
                m.allowed[i][j] = m.trans(i, j) > 0 ? 1 : 0;
        for (int s = 0; s < ns; ++s) {
            expect("state");
            expect("components");
            int K;
            in >> K;
            GaussianMixture mix;
            for (int k = 0; k < K; ++k) {
                expect("weight");
                double w;
                in >> w;
                mix.weights.push_back(w);
                expect("mean");
                Eigen::VectorXd mean(set.dim);
                for (int i = 0; i < set.dim; ++i) in >> mean(i);
                mix.means.push_back(mean);
                expect("var");
                Eigen::VectorXd var(set.dim);
                for (int i = 0; i < set.dim; ++i) in >> var(i);
                mix.vars.push_back(var);
            }
            m.states.push_back(std::move(mix));
        }
        set.models.push_back(std::move(m));
    }
    return set;
}

}  // namespace vsr
