#include "depulse/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>

#include "depulse/errors.hpp"

namespace depulse {

void SamplerConfig::validate() const {
    if (iterations < 1) throw ConfigError("sampler: iterations must be >= 1");
    if (burn_in < 0 || burn_in >= iterations)
        throw ConfigError("sampler: burn-in must lie in [0, iterations)");
    if (thin < 1) throw ConfigError("sampler: thin must be >= 1");
    if (loc_proposal_width < 1) throw ConfigError("sampler: proposal width must be >= 1");
    for (double v : shape_proposal_vars)
        if (v < 0.0) throw ConfigError("sampler: proposal variances must be >= 0");
    if (!(alpha_d > 0.0) || !(beta_d > 0.0))
        throw ConfigError("sampler: inverse-gamma prior parameters must be positive");
}

// ---------------------------------------------------------------------------
// BlockLikelihood

BlockLikelihood::BlockLikelihood(Eigen::VectorXd y, ArModel ar, double tail_var)
    : y_(std::move(y)), ar_(std::move(ar)), tail_var_(tail_var) {
    const int n = static_cast<int>(y_.size());
    const int p = ar_.order();
    if (n <= p) throw DimensionError("excerpt shorter than AR order");
    if (!(ar_.sigma_e2 > 0.0)) throw NumericError("AR innovation variance must be positive");
    if (tail_var_ < 0.0) throw NumericError("tail variance must be non-negative");
    if (tail_var_ == 0.0) tail_var_ = ar_.sigma_e2;

    res_full_.resize(n - p);
    for (int r = 0; r < n - p; ++r) {
        double acc = y_(r + p);
        for (int i = 1; i <= p; ++i) acc -= ar_.a(i - 1) * y_(r + p - i);
        res_full_(r) = acc;
    }
    prefix_sq_.resize(n - p + 1);
    prefix_sq_(0) = 0.0;
    for (int r = 0; r < n - p; ++r) prefix_sq_(r + 1) = prefix_sq_(r) + res_full_(r) * res_full_(r);
}

void BlockLikelihood::check(const SegmentPartition& part, const Eigen::VectorXd& v_t) const {
    part.validate();
    if (part.n != block_len()) throw PartitionError("partition does not match the excerpt");
    if (part.n0 < order()) throw PartitionError("need at least P samples before n0");
    if (v_t.size() != part.n2()) throw DimensionError("v_t length must equal |i2|");
}

void BlockLikelihood::fill_a1_window(const SegmentPartition& part, int win_start, int win_end,
                                     Eigen::MatrixXd& a1) const {
    const int p = order();
    a1.setZero(win_end - win_start, part.m);
    for (int j = 0; j < part.m; ++j) {
        const int c = part.n0 + j;
        for (int r = std::max(win_start, c - p); r < std::min(win_end, c + 1); ++r) {
            const int d = c - r;
            a1(r - win_start, j) = d == p ? 1.0 : -ar_.a(p - 1 - d);
        }
    }
}

BlockLikelihood::Workspace BlockLikelihood::assemble(const SegmentPartition& part,
                                                     const Eigen::VectorXd& v_t,
                                                     double sigma_d2) const {
    check(part, v_t);
    if (!(sigma_d2 > 0.0)) throw NumericError("sigma_d2 must be positive");
    const int p = order();
    const int n = block_len();
    const int i2s = part.i2_start();
    const int n2 = part.n2();
    const double inv_e = 1.0 / ar_.sigma_e2;
    const double inv_x = 1.0 / tail_var_;

    Workspace w;
    w.win_start = std::max(0, part.n0 - p);
    w.win_end = std::min(i2s, n - p);

    // Rows around the discontinuity; everything before is the plain AR
    // residual of y, everything after is a tail sample by itself.
    const int win_h = w.win_end - w.win_start;
    w.u_win.resize(win_h);
    w.w_win.resize(win_h);
    for (int r = w.win_start; r < w.win_end; ++r) {
        const int smp = r + p;
        double acc;
        if (smp < part.n0)
            acc = res_full_(r);
        else {
            acc = smp >= i2s ? y_(smp) - v_t(smp - i2s) : 0.0;
            for (int i = std::max(1, smp - part.n0 + 1); i <= p; ++i)
                acc -= ar_.a(i - 1) * y_(smp - i);
        }
        w.u_win(r - w.win_start) = acc;
        w.w_win(r - w.win_start) = smp >= i2s ? inv_x : inv_e;
    }

    w.quad = prefix_sq_(w.win_start) * inv_e +
             w.u_win.cwiseAbs2().dot(w.w_win);
    for (int k = w.win_end + p - i2s; k < n2; ++k) {
        const double t = y_(i2s + k) - v_t(k);
        w.quad += t * t * inv_x;
    }

    if (part.m > 0) {
        fill_a1_window(part, w.win_start, w.win_end, w.a1_win);
        Eigen::MatrixXd phi =
            w.a1_win.transpose() * w.w_win.asDiagonal() * w.a1_win;
        phi.diagonal().array() += 1.0 / sigma_d2;
        w.phi_chol = chol_with_jitter(std::move(phi));
        w.log_det_phi = 0.0;
        for (int i = 0; i < part.m; ++i)
            w.log_det_phi += 2.0 * std::log(w.phi_chol.matrixLLT()(i, i));
        w.theta = y_.segment(part.n0, part.m) / sigma_d2 -
                  w.a1_win.transpose() * w.w_win.cwiseProduct(w.u_win);
    }
    return w;
}

double BlockLikelihood::loglik(const SegmentPartition& part, const Eigen::VectorXd& v_t,
                               double sigma_d2, bool paper_normalization) const {
    const Workspace w = assemble(part, v_t, sigma_d2);
    const int rows = block_len() - order();
    const int n_tail = part.n2();  // rows whose unit entry is a tail sample
    const double base = -0.5 * rows * std::log(2.0 * M_PI) -
                        0.5 * (rows - n_tail) * std::log(ar_.sigma_e2) -
                        0.5 * n_tail * std::log(tail_var_);
    if (part.m == 0) return base - 0.5 * w.quad;
    const double y1sq = y_.segment(part.n0, part.m).squaredNorm();
    const double c = w.quad + y1sq / sigma_d2;
    const double norm = -0.5 * part.m * std::log(sigma_d2) - 0.5 * w.log_det_phi;
    return base + (paper_normalization ? 2.0 : 1.0) * norm -
           0.5 * (c - w.theta.dot(w.phi_chol.solve(w.theta)));
}

GaussianParams BlockLikelihood::x1_posterior(const SegmentPartition& part,
                                             const Eigen::VectorXd& v_t, double sigma_d2) const {
    const Workspace w = assemble(part, v_t, sigma_d2);
    GaussianParams out;
    if (part.m == 0) return out;
    out.mean = w.phi_chol.solve(w.theta);
    out.covariance = w.phi_chol.solve(Eigen::MatrixXd::Identity(part.m, part.m));
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
    return out;
}

ScalarGaussian BlockLikelihood::vt_conditional(const SegmentPartition& part,
                                               const Eigen::VectorXd& g, double sigma_d2) const {
    if (g.size() != part.n2()) throw DimensionError("unit tail shape must cover i2");
    const Eigen::VectorXd zero_tail = Eigen::VectorXd::Zero(part.n2());
    const Workspace w = assemble(part, zero_tail, sigma_d2);

    const int p = order();
    const int i2s = part.i2_start();
    const int n2 = part.n2();
    const int kpure = w.win_end + p - i2s;
    const double inv_x = 1.0 / tail_var_;

    // u1 = A2 g is g placed at rows i2s - P + k; all of them are tail rows.
    double a = g.squaredNorm() * inv_x;
    double b = 0.0;
    for (int r = std::max(w.win_start, i2s - p); r < w.win_end; ++r)
        b += w.u_win(r - w.win_start) * g(r + p - i2s) * inv_x;
    for (int k = kpure; k < n2; ++k) b += y_(i2s + k) * g(k) * inv_x;

    if (part.m > 0) {
        Eigen::VectorXd u1_win = Eigen::VectorXd::Zero(w.win_end - w.win_start);
        for (int r = std::max(w.win_start, i2s - p); r < w.win_end; ++r)
            u1_win(r - w.win_start) = g(r + p - i2s);
        const Eigen::VectorXd c1 =
            w.a1_win.transpose() * w.w_win.cwiseProduct(u1_win);
        const Eigen::VectorXd phi_c1 = w.phi_chol.solve(c1);
        a -= c1.dot(phi_c1);
        b += w.theta.dot(phi_c1);
    }
    if (!(a > 0.0)) throw NumericError("tail amplitude conditional is degenerate");
    return {b / a, 1.0 / a};
}

// ---------------------------------------------------------------------------
// GpTailSolver

GpTailSolver::GpTailSolver(const BlockLikelihood* lik, GpHyper hyper)
    : lik_(lik), hyper_(hyper) {
    if (!(hyper_.sigma_f2 > 0.0) || !(hyper_.sigma_l2 > 0.0))
        throw NumericError("GP hyperparameters must be positive");
}

void GpTailSolver::ensure_factor(int n2) {
    if (n2 <= factored_) return;
    const int target = std::min(n2 + 256, lik_->block_len());
    chol_.resize(target, target);
    const double diag_add = lik_->tail_var() + 1e-8 * hyper_.sigma_f2;
    for (int j = 0; j < target; ++j)
        for (int i = 0; i < target; ++i) chol_(i, j) = se_kernel(i - j, hyper_);
    chol_.diagonal().array() += diag_add;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(chol_);  // in place
    if (llt.info() != Eigen::Success)
        throw NumericError("GP solver: C + tail variance I not positive definite");
    factored_ = target;
}

Eigen::VectorXd GpTailSolver::solve_kernel(const Eigen::VectorXd& rhs) const {
    const auto n = rhs.size();
    const auto l = chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>();
    Eigen::VectorXd x = l.solve(rhs);
    l.transpose().solveInPlace(x);
    return x;
}

Eigen::VectorXd GpTailSolver::apply_h0_inverse(const Eigen::VectorXd& x) const {
    // H0 = C^-1 + I/tail_var; H0^-1 = tail_var (I - tail_var (C + tail_var I)^-1).
    const double sx2 = lik_->tail_var();
    return sx2 * (x - sx2 * solve_kernel(x));
}

const Eigen::VectorXd& GpTailSolver::mean(const SegmentPartition& part) {
    if (part.n0 != cached_n0_ || part.m != cached_m_) {
        cached_mean_ = compute(part);
        cached_n0_ = part.n0;
        cached_m_ = part.m;
    }
    return cached_mean_;
}

Eigen::VectorXd GpTailSolver::compute(const SegmentPartition& part) {
    const int p = lik_->order();
    const int i2s = part.i2_start();
    const int n2 = part.n2();
    if (n2 < 1) throw PartitionError("GP solver: empty tail");
    if (part.m < 1) throw PartitionError("GP solver: empty discontinuity");
    const double sx2 = lik_->tail_var();
    ensure_factor(n2);

    const Eigen::VectorXd zero_tail = Eigen::VectorXd::Zero(n2);
    const auto w = lik_->assemble(part, zero_tail, 1.0);

    // A2' u0 picks u at rows i2s - P + k; beyond the window that is y2(k).
    Eigen::VectorXd a2t_u(n2);
    for (int k = 0; k < n2; ++k) {
        const int r = i2s - p + k;
        a2t_u(k) = r < w.win_end ? w.u_win(r - w.win_start) : lik_->y()(i2s + k);
    }

    // Weighted Gram G = A1' D^-1 A1 and the correction q feeding
    // t = R21 y0 + R22 y2 (rows of A2 all carry the tail weight).
    const Eigen::MatrixXd gram =
        w.a1_win.transpose() * w.w_win.asDiagonal() * w.a1_win;
    Eigen::LLT<Eigen::MatrixXd> gram_chol = chol_with_jitter(gram);
    const Eigen::VectorXd a1t_u = w.a1_win.transpose() * w.w_win.cwiseProduct(w.u_win);
    const Eigen::VectorXd q = gram_chol.solve(a1t_u);

    // W = A2'A1 is non-zero only on the first min(P, n2) tail rows.
    const int pm = std::min(p, n2);
    Eigen::MatrixXd wtop = Eigen::MatrixXd::Zero(pm, part.m);
    for (int k = 0; k < pm; ++k)
        for (int j = 0; j < part.m; ++j) {
            const int d = p + j - part.m - k;
            if (d >= 0 && d <= p) wtop(k, j) = d == p ? 1.0 : -lik_->ar().a(p - 1 - d);
        }

    Eigen::VectorXd t_vec = a2t_u;
    t_vec.head(pm) -= wtop * q;
    t_vec /= sx2;

    // Woodbury for H = H0 - V V', V = (A2' D^-1 A1) G^{-T/2}.
    const Eigen::MatrixXd vtop =
        gram_chol.matrixL().solve(wtop.transpose()).transpose() / sx2;

    const Eigen::VectorXd h0t = apply_h0_inverse(t_vec);
    Eigen::MatrixXd h0v(n2, part.m);
    Eigen::VectorXd col = Eigen::VectorXd::Zero(n2);
    for (int j = 0; j < part.m; ++j) {
        col.setZero();
        col.head(pm) = vtop.col(j);
        h0v.col(j) = apply_h0_inverse(col);
    }

    Eigen::MatrixXd cap = Eigen::MatrixXd::Identity(part.m, part.m);
    cap.noalias() -= vtop.transpose() * h0v.topRows(pm);
    Eigen::LLT<Eigen::MatrixXd> cap_chol = chol_with_jitter(std::move(cap));

    return h0t + h0v * cap_chol.solve(vtop.transpose() * h0t.head(pm));
}

// ---------------------------------------------------------------------------
// Shape-tail initialization

ShapeTailParams shape_tail_coarse_init(const BlockLikelihood& lik, const SegmentPartition& part,
                                       double sigma_d2, int sample_rate_hz,
                                       const ShapeTailParams& base) {
    const double tau_m_grid[] = {0.02, 0.04, 0.07, 0.12};
    const double tau_f_grid[] = {0.004, 0.008, 0.016, 0.032, 0.064, 0.128};
    const double f_max_grid[] = {25.0, 40.0, 55.0, 70.0, 90.0};
    const double f_min_grid[] = {14.0, 20.0, 28.0};
    const double phi_grid[] = {0.0, M_PI_2, M_PI, 3.0 * M_PI_2};

    ShapeTailParams best = base;
    double best_ll;
    {
        const Eigen::VectorXd v =
            synth_shape_tail(base, part.n2(), sample_rate_hz);
        best_ll = lik.loglik(part, v, sigma_d2);
    }

    ShapeTailParams cand;
    cand.v_t = 1.0;
    for (double tm : tau_m_grid)
        for (double tf : tau_f_grid)
            for (double fx : f_max_grid)
                for (double fn : f_min_grid) {
                    if (fx < fn) continue;
                    for (double ph : phi_grid) {
                        cand.tau_m = tm;
                        cand.tau_f = tf;
                        cand.f_max = fx;
                        cand.f_min = fn;
                        cand.phi = ph;
                        cand.v_t = 1.0;
                        const Eigen::VectorXd g =
                            synth_shape_tail(cand, part.n2(), sample_rate_hz);
                        ScalarGaussian cond;
                        try {
                            cond = lik.vt_conditional(part, g, sigma_d2);
                        } catch (const NumericError&) {
                            continue;
                        }
                        const double ll =
                            lik.loglik(part, Eigen::VectorXd(cond.mean * g), sigma_d2);
                        if (ll > best_ll) {
                            best_ll = ll;
                            cand.v_t = cond.mean;
                            best = cand;
                        }
                    }
                }
    return best;
}

// ---------------------------------------------------------------------------
// Chain summaries

double Chain::loc_acceptance_rate(int from_iteration) const {
    long acc = 0, tot = 0;
    for (std::size_t k = static_cast<std::size_t>(std::max(from_iteration, 0));
         k < states.size(); ++k) {
        acc += states[k].loc_accepted ? 1 : 0;
        ++tot;
    }
    return tot > 0 ? static_cast<double>(acc) / static_cast<double>(tot) : 0.0;
}

double Chain::shape_acceptance_rate(int param, int from_iteration) const {
    if (param < 0 || param >= kShapeParamCount) throw DimensionError("bad shape parameter index");
    long acc = 0, tot = 0;
    for (std::size_t k = static_cast<std::size_t>(std::max(from_iteration, 0));
         k < states.size(); ++k) {
        acc += states[k].shape_accepted[param];
        tot += states[k].shape_proposed[param];
    }
    return tot > 0 ? static_cast<double>(acc) / static_cast<double>(tot) : 0.0;
}

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DimensionError("quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

// ---------------------------------------------------------------------------
// GibbsSampler

GibbsSampler::GibbsSampler(GibbsProblem problem, SamplerConfig config)
    : problem_(std::move(problem)),
      config_(config),
      lik_(problem_.y, problem_.ar, problem_.tail_var) {
    config_.validate();
    const int n = lik_.block_len();
    const int p = lik_.order();
    problem_.min_n0 = std::max(problem_.min_n0, p);
    if (problem_.n0_init < problem_.min_n0 || problem_.m_init < 1 ||
        problem_.n0_init + problem_.m_init >= n)
        throw ConfigError("gibbs: initial (n0, M) out of range");
    if (!(problem_.sigma_d2_init > 0.0)) throw ConfigError("gibbs: sigma_d2 init must be positive");

    state_.n0 = problem_.n0_init;
    state_.m = problem_.m_init;
    state_.sigma_d2 = problem_.sigma_d2_init;
    state_.x1 = Eigen::VectorXd::Zero(state_.m);

    const SegmentPartition part = partition();
    if (problem_.kind == TailModelKind::kShape) {
        state_.shape = problem_.shape_init;
        state_.shape.validate();
        if (problem_.shape_coarse_init)
            state_.shape = shape_tail_coarse_init(lik_, part, state_.sigma_d2,
                                                  problem_.sample_rate_hz, state_.shape);
        state_.v_t = shape_template(state_.shape, part);
    } else {
        if (problem_.gp_init.v_t.size() != part.n2())
            throw ConfigError("gibbs: GP tail initialization does not cover i2");
        gp_solver_.emplace(&lik_, problem_.gp_init.hyper);
        state_.v_t = problem_.gp_init.v_t;
    }
}

SegmentPartition GibbsSampler::partition() const {
    return SegmentPartition{state_.n0, state_.m, lik_.block_len()};
}

double GibbsSampler::current_loglik() const {
    return lik_.loglik(partition(), state_.v_t, state_.sigma_d2, config_.paper_normalization);
}

Eigen::VectorXd GibbsSampler::shape_template(const ShapeTailParams& params,
                                             const SegmentPartition& part) const {
    const int offset =
        problem_.tail_anchor >= 0 ? part.i2_start() - problem_.tail_anchor : 0;
    return synth_shape_tail_from(params, offset, part.n2(), problem_.sample_rate_hz);
}

Eigen::VectorXd GibbsSampler::tail_for(const SegmentPartition& part) const {
    if (problem_.kind == TailModelKind::kShape) return shape_template(state_.shape, part);
    // GP tail values are tied to absolute sample indices; a shifted
    // partition reuses the overlap and sees zero elsewhere.
    const int cur_start = state_.n0 + state_.m;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(part.n2());
    for (int k = 0; k < part.n2(); ++k) {
        const int idx = part.i2_start() + k - cur_start;
        if (idx >= 0 && idx < state_.v_t.size()) out(k) = state_.v_t(idx);
    }
    return out;
}

bool GibbsSampler::location_step(Rng& rng) {
    const int w = config_.loc_proposal_width;
    const auto dn = rng.uniform_int(-(w / 2), w - 1 - w / 2);
    const auto dm = rng.uniform_int(-(w / 2), w - 1 - w / 2);
    const int n0p = state_.n0 + static_cast<int>(dn);
    const int mp = state_.m + static_cast<int>(dm);

    state_.loc_accepted = false;
    const int n = lik_.block_len();
    if (n0p < problem_.min_n0 || mp < 1 || n0p + mp >= n) return false;  // auto-reject

    const SegmentPartition proposed{n0p, mp, n};
    double cur_ll, new_ll;
    if (loc_target_override_) {
        cur_ll = loc_target_override_(state_.n0, state_.m);
        new_ll = loc_target_override_(n0p, mp);
    } else {
        cur_ll = current_loglik();
        new_ll = lik_.loglik(proposed, tail_for(proposed), state_.sigma_d2,
                             config_.paper_normalization);
    }

    const double log_ratio = new_ll - cur_ll;  // symmetric proposal, flat priors
    if (log_ratio < 0.0 && std::log(rng.uniform_pos()) >= log_ratio) return false;

    Eigen::VectorXd x1_new = Eigen::VectorXd::Zero(mp);
    for (int k = 0; k < mp; ++k) {
        const int old = n0p + k - state_.n0;
        if (old >= 0 && old < state_.m) x1_new(k) = state_.x1(old);
    }
    state_.v_t = tail_for(proposed);
    state_.x1 = std::move(x1_new);
    state_.n0 = n0p;
    state_.m = mp;
    state_.loc_accepted = true;
    return true;
}

std::array<uint8_t, kShapeParamCount> GibbsSampler::shape_params_step(Rng& rng) {
    if (problem_.kind != TailModelKind::kShape)
        throw ConfigError("shape step called on a GP-model sampler");
    const SegmentPartition part = partition();
    std::array<uint8_t, kShapeParamCount> accepted{};
    state_.shape_proposed.fill(1);

    auto param_ref = [](ShapeTailParams& s, int idx) -> double& {
        switch (idx) {
            case kTauM: return s.tau_m;
            case kTauF: return s.tau_f;
            case kFMax: return s.f_max;
            case kFMin: return s.f_min;
            default: return s.phi;
        }
    };
    auto positive_ok = [&](const ShapeTailParams& s) {
        return s.tau_m > 0.0 && s.tau_f > 0.0 && s.f_max > 0.0 && s.f_min > 0.0;
    };

    double cur_ll = current_loglik();
    if (config_.shape_block_proposal) {
        ShapeTailParams prop = state_.shape;
        for (int i = 0; i < kShapeParamCount; ++i)
            param_ref(prop, i) += rng.normal() * std::sqrt(config_.shape_proposal_vars[i]);
        bool ok = positive_ok(prop);
        if (ok) {
            const Eigen::VectorXd v_prop = shape_template(prop, part);
            const double new_ll =
                lik_.loglik(part, v_prop, state_.sigma_d2, config_.paper_normalization);
            const double log_ratio = new_ll - cur_ll;
            ok = log_ratio >= 0.0 || std::log(rng.uniform_pos()) < log_ratio;
            if (ok) {
                state_.shape = prop;
                state_.v_t = v_prop;
            }
        }
        accepted.fill(ok ? 1 : 0);
    } else {
        for (int i = 0; i < kShapeParamCount; ++i) {
            ShapeTailParams prop = state_.shape;
            param_ref(prop, i) += rng.normal() * std::sqrt(config_.shape_proposal_vars[i]);
            if (!positive_ok(prop)) continue;  // indicator prior, no likelihood evaluation
            const Eigen::VectorXd v_prop = shape_template(prop, part);
            const double new_ll =
                lik_.loglik(part, v_prop, state_.sigma_d2, config_.paper_normalization);
            const double log_ratio = new_ll - cur_ll;
            if (log_ratio >= 0.0 || std::log(rng.uniform_pos()) < log_ratio) {
                state_.shape = prop;
                state_.v_t = v_prop;
                cur_ll = new_ll;
                accepted[i] = 1;
            }
        }
    }
    state_.shape_accepted = accepted;
    return accepted;
}

void GibbsSampler::vt_amplitude_step(Rng& rng) {
    if (problem_.kind != TailModelKind::kShape)
        throw ConfigError("amplitude step called on a GP-model sampler");
    const SegmentPartition part = partition();
    ShapeTailParams unit = state_.shape;
    unit.v_t = 1.0;
    const Eigen::VectorXd g = shape_template(unit, part);
    const ScalarGaussian cond = lik_.vt_conditional(part, g, state_.sigma_d2);
    state_.shape.v_t = cond.mean + std::sqrt(cond.variance) * rng.normal();
    state_.v_t = state_.shape.v_t * g;
    // (V_t, phi) and (-V_t, phi + pi) describe the same tail; keep the
    // canonical branch so chain summaries compare against one convention.
    if (state_.shape.v_t < 0.0) {
        state_.shape.v_t = -state_.shape.v_t;
        state_.shape.phi += M_PI;
    }
    state_.shape.phi = std::remainder(state_.shape.phi, 2.0 * M_PI);
}

void GibbsSampler::gp_tail_step() {
    if (problem_.kind != TailModelKind::kGp)
        throw ConfigError("GP step called on a shape-model sampler");
    state_.v_t = gp_solver_->mean(partition());
}

void GibbsSampler::x1_step(Rng& rng) {
    const GaussianParams post = lik_.x1_posterior(partition(), state_.v_t, state_.sigma_d2);
    Eigen::VectorXd xi(state_.m);
    for (int i = 0; i < state_.m; ++i) xi(i) = rng.normal();
    const Eigen::LLT<Eigen::MatrixXd> llt = chol_with_jitter(post.covariance);
    state_.x1 = post.mean + llt.matrixL() * xi;
}

double GibbsSampler::sigma_d2_step(Rng& rng) {
    const Eigen::VectorXd v_d =
        lik_.y().segment(state_.n0, state_.m) - state_.x1;
    const InvGammaParams ig =
        sigma_d2_posterior_params(v_d, config_.alpha_d, config_.beta_d);
    state_.sigma_d2 = rng.inverse_gamma(ig.alpha, ig.beta);
    return state_.sigma_d2;
}

void GibbsSampler::sweep(Rng& rng) {
    location_step(rng);
    if (problem_.kind == TailModelKind::kShape) {
        shape_params_step(rng);
        vt_amplitude_step(rng);
    } else {
        gp_tail_step();
    }
    x1_step(rng);
    sigma_d2_step(rng);
}

Chain GibbsSampler::run() {
    Rng rng(config_.seed);
    Chain chain;
    chain.kind = problem_.kind;
    chain.config = config_;
    chain.states.reserve(config_.iterations);
    for (int k = 0; k < config_.iterations; ++k) {
        sweep(rng);
        chain.states.push_back(state_);
    }
    return chain;
}

Chain run_gibbs(const GibbsProblem& problem, const SamplerConfig& config) {
    return GibbsSampler(problem, config).run();
}

// ---------------------------------------------------------------------------
// chain_estimate

namespace {

ParamSummary summarize(const std::vector<double>& v) {
    ParamSummary s;
    double acc = 0.0;
    for (double x : v) acc += x;
    s.mean = acc / static_cast<double>(v.size());
    s.lo = empirical_quantile(v, 0.025);
    s.hi = empirical_quantile(v, 0.975);
    if (s.mean < s.lo || s.mean > s.hi)
        std::cerr << "depulse: posterior mean outside the 95% interval (multimodal chain?)\n";
    return s;
}

}  // namespace

PosteriorEstimate chain_estimate(const Chain& chain, int burn_in, int thin) {
    const auto total = static_cast<int>(chain.states.size());
    if (burn_in < 0 || thin < 1 || burn_in >= total)
        throw ConfigError("chain estimate: no retained samples");

    std::vector<int> keep;
    for (int k = burn_in; k < total; k += thin) keep.push_back(k);

    PosteriorEstimate est;
    est.retained = static_cast<int>(keep.size());

    std::vector<double> n0s, ms, sd2;
    std::map<std::pair<int, int>, int> partition_count;
    for (int k : keep) {
        const ChainState& s = chain.states[k];
        n0s.push_back(s.n0);
        ms.push_back(s.m);
        sd2.push_back(s.sigma_d2);
        ++partition_count[{s.n0, s.m}];
    }
    est.n0 = summarize(n0s);
    est.m = summarize(ms);
    est.sigma_d2 = summarize(sd2);

    int best = 0;
    for (const auto& [part, count] : partition_count)
        if (count > best) {
            best = count;
            est.modal_n0 = part.first;
            est.modal_m = part.second;
        }

    if (chain.kind == TailModelKind::kShape) {
        std::array<std::vector<double>, 6> vals;
        for (int k : keep) {
            const ShapeTailParams& p = chain.states[k].shape;
            vals[0].push_back(p.v_t);
            vals[1].push_back(p.tau_m);
            vals[2].push_back(p.tau_f);
            vals[3].push_back(p.f_max);
            vals[4].push_back(p.f_min);
            vals[5].push_back(p.phi);
        }
        est.shape.emplace();
        for (int i = 0; i < 6; ++i) (*est.shape)[i] = summarize(vals[i]);
    }

    int modal_count = 0;
    for (int k : keep) {
        const ChainState& s = chain.states[k];
        if (s.n0 != est.modal_n0 || s.m != est.modal_m) continue;
        if (modal_count == 0) {
            est.v_t = s.v_t;
            est.x1 = s.x1;
        } else {
            est.v_t += s.v_t;
            est.x1 += s.x1;
        }
        ++modal_count;
    }
    if (modal_count > 0) {
        est.v_t /= modal_count;
        est.x1 /= modal_count;
    }
    return est;
}

}  // namespace depulse
