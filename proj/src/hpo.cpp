#include "rcvae/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rcvae/errors.hpp"

namespace rcvae {

void SearchSpace::validate() const {
    if (eta_min <= 0 || eta_max < eta_min)
        throw ConfigError("search space: bad eta range");
    if (h_max < h_min || j_max < j_min || d_max < d_min || k_max < k_min)
        throw ConfigError("search space: inverted integer range");
    if (h_min < 1 || j_min < 1 || d_min < 1 || k_min < 1)
        throw ConfigError("search space: integer dims must start at 1");
}

namespace {

std::size_t round_dim(double u, std::size_t lo, std::size_t hi) {
    double v = static_cast<double>(lo) + u * (static_cast<double>(hi) - static_cast<double>(lo));
    auto r = static_cast<long long>(std::llround(v));
    r = std::max<long long>(static_cast<long long>(lo), std::min<long long>(r, static_cast<long long>(hi)));
    return static_cast<std::size_t>(r);
}

}  // namespace

HpoPoint decode_point(const SearchSpace& space, const std::vector<double>& unit) {
    if (unit.size() != SearchSpace::kDims)
        throw DimensionError("decode_point: expected " + std::to_string(SearchSpace::kDims) +
                             " coords, got " + std::to_string(unit.size()));
    for (double u : unit)
        if (u < 0.0 || u > 1.0)
            throw ConfigError("decode_point: coordinate outside [0,1]");
    HpoPoint p;
    p.eta = std::exp(std::log(space.eta_min) +
                     unit[0] * (std::log(space.eta_max) - std::log(space.eta_min)));
    p.h = round_dim(unit[1], space.h_min, space.h_max);
    p.j = round_dim(unit[2], space.j_min, space.j_max);
    p.d = round_dim(unit[3], space.d_min, space.d_max);
    p.k = round_dim(unit[4], space.k_min, space.k_max);
    return p;
}

// --- Gaussian process with expected improvement ------------------------------

namespace {

constexpr double kLengthScale = 0.25;
constexpr double kVarFloor = 1e-12;

double rbf(const std::vector<double>& a, const std::vector<double>& b) {
    double d2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::exp(-d2 / (2.0 * kLengthScale * kLengthScale));
}

// Lower Cholesky in place over a dense row-major n x n; false on failure.
bool cholesky(std::vector<double>& m, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = m[i * n + j];
            for (std::size_t t = 0; t < j; ++t) s -= m[i * n + t] * m[j * n + t];
            if (i == j) {
                if (s <= 0) return false;
                m[i * n + i] = std::sqrt(s);
            } else {
                m[i * n + j] = s / m[j * n + j];
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = 0;
    }
    return true;
}

void solve_lower(const std::vector<double>& l, std::size_t n, std::vector<double>& b) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < i; ++j) s -= l[i * n + j] * b[j];
        b[i] = s / l[i * n + i];
    }
}

void solve_upper_t(const std::vector<double>& l, std::size_t n, std::vector<double>& b) {
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= l[j * n + ii] * b[j];
        b[ii] = s / l[ii * n + ii];
    }
}

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

BoState::BoState(std::size_t dims, std::uint64_t seed, double noise)
    : dims_(dims), noise_(noise), rng_(seed) {
    if (dims_ < 1) throw ConfigError("BoState: dims must be >= 1");
    if (noise_ < 0) throw ConfigError("BoState: noise must be >= 0");
}

double BoState::best_y() const {
    if (ys_.empty()) throw StateError("BoState: no observations");
    return *std::min_element(ys_.begin(), ys_.end());
}

const std::vector<double>& BoState::best_x() const {
    if (ys_.empty()) throw StateError("BoState: no observations");
    std::size_t bi = 0;
    for (std::size_t i = 1; i < ys_.size(); ++i)
        if (ys_[i] < ys_[bi]) bi = i;
    return xs_[bi];
}

void BoState::refit() const {
    std::size_t n = ys_.size();
    y_mean_ = 0;
    for (double y : ys_) y_mean_ += y;
    y_mean_ /= static_cast<double>(n);

    double jitter = 0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        chol_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                chol_[i * n + j] = rbf(xs_[i], xs_[j]) + ((i == j) ? noise_ + jitter : 0.0);
        if (cholesky(chol_, n)) {
            alpha_.resize(n);
            for (std::size_t i = 0; i < n; ++i) alpha_[i] = ys_[i] - y_mean_;
            solve_lower(chol_, n, alpha_);
            solve_upper_t(chol_, n, alpha_);
            fitted_ = true;
            return;
        }
        jitter = (jitter == 0) ? 1e-10 : jitter * 10.0;
    }
    throw NumericError("BoState: Gram matrix not positive definite after jitter escalation");
}

void BoState::predict(const std::vector<double>& x, double* mu, double* var) const {
    if (x.size() != dims_) throw DimensionError("BoState::predict: wrong dimensionality");
    if (ys_.empty()) {
        *mu = 0;
        *var = 1.0 + noise_;
        return;
    }
    if (!fitted_) refit();
    std::size_t n = ys_.size();
    std::vector<double> ks(n);
    for (std::size_t i = 0; i < n; ++i) ks[i] = rbf(x, xs_[i]);
    double m = y_mean_;
    for (std::size_t i = 0; i < n; ++i) m += ks[i] * alpha_[i];
    std::vector<double> v = ks;
    solve_lower(chol_, n, v);
    double reduction = 0;
    for (double t : v) reduction += t * t;
    *mu = m;
    *var = std::max(0.0, 1.0 + noise_ - reduction);
}

double BoState::ei(const std::vector<double>& x) const {
    if (ys_.empty()) return 0;
    double mu = 0, var = 0;
    predict(x, &mu, &var);
    if (var <= kVarFloor) return 0;
    double sigma = std::sqrt(var);
    double gap = best_y() - mu;
    double u = gap / sigma;
    double val = gap * norm_cdf(u) + sigma * norm_pdf(u);
    return std::max(0.0, val);
}

std::vector<double> BoState::suggest() {
    std::size_t warmup = std::max<std::size_t>(5, dims_ + 1);
    auto draw = [this] {
        std::vector<double> x(dims_);
        for (auto& v : x) v = rng_.next_unit();
        return x;
    };
    if (ys_.size() < warmup) return draw();
    std::vector<double> best_c = draw();
    double best_ei = ei(best_c);
    for (int c = 1; c < 1024; ++c) {
        std::vector<double> cand = draw();
        double e = ei(cand);
        if (e > best_ei) {
            best_ei = e;
            best_c = std::move(cand);
        }
    }
    return best_c;
}

void BoState::observe(const std::vector<double>& x, double y) {
    if (x.size() != dims_) throw DimensionError("BoState::observe: wrong dimensionality");
    for (double v : x)
        if (v < 0.0 || v > 1.0) throw ConfigError("BoState::observe: point outside unit cube");
    if (!std::isfinite(y)) throw NumericError("BoState::observe: non-finite objective");
    xs_.push_back(x);
    ys_.push_back(y);
    fitted_ = false;
}

// --- trial driver -------------------------------------------------------------

HpoResult run_hpo(const HpoProblem& problem, const SearchSpace& space, std::size_t budget,
                  std::uint64_t seed, HpoMethod method) {
    space.validate();
    if (budget < 1) throw HpoError("run_hpo: budget must be >= 1");
    if (problem.train_samples.empty()) throw DataError("run_hpo: no training samples");
    std::size_t d_x = problem.train_samples[0].features.size();
    if (d_x != feature_dim(problem.height, problem.width))
        throw DimensionError("run_hpo: sample feature length inconsistent with H x W");

    Rng root(seed);
    BoState bo(SearchSpace::kDims, root.split(1).seed());

    HpoResult result;
    double worst_ok = 0;
    bool any_ok = false;

    for (std::size_t t = 0; t < budget; ++t) {
        // Random method rides the identical suggestion stream through the
        // warmup (so both methods score the very same opening configs), then
        // keeps drawing uniformly instead of handing over to the surrogate.
        std::vector<double> unit;
        std::size_t warmup = std::max<std::size_t>(5, SearchSpace::kDims + 1);
        if (method == HpoMethod::GpEi || bo.count() < warmup) {
            unit = bo.suggest();
        } else {
            unit.resize(SearchSpace::kDims);
            Rng sub = root.split(100 + t);
            for (auto& v : unit) v = sub.next_unit();
        }
        HpoPoint point = decode_point(space, unit);

        TrialRow row;
        row.trial = t;
        row.point = point;
        double objective;
        try {
            RcvaeConfig mc;
            mc.d_x = d_x;
            mc.embed_dim = point.d;
            mc.latent_dim = point.j;
            mc.hidden = point.h;
            mc.enc_layers = problem.enc_layers;
            mc.dec_layers = problem.dec_layers;
            TrainConfig tc;
            tc.max_epochs = problem.trial_epochs;
            tc.patience = std::min(problem.patience, problem.trial_epochs - 1);
            tc.batch = point.k;
            tc.lr = point.eta;
            tc.seed = root.split(3000 + t).seed();
            TrainResult tr = train(problem.train_samples, problem.val_samples, mc, tc,
                                   problem.scaler, problem.height, problem.width,
                                   problem.match_weight);
            objective = tr.state.best_val_mae;
            row.val_mae = objective;
            row.status = "ok";
            worst_ok = any_ok ? std::max(worst_ok, objective) : objective;
            any_ok = true;
        } catch (const Error&) {
            objective = any_ok ? 2.0 * worst_ok : 1e6;
            row.val_mae = objective;
            row.status = "failed";
        }
        bo.observe(unit, objective);
        result.trials.push_back(row);
    }

    const TrialRow* best = nullptr;
    for (const auto& row : result.trials)
        if (row.status == "ok" && (!best || row.val_mae < best->val_mae)) best = &row;
    if (!best) throw HpoError("run_hpo: every trial failed");
    result.best = best->point;
    result.best_val_mae = best->val_mae;
    return result;
}

std::string trials_csv(const std::vector<TrialRow>& rows) {
    std::ostringstream out;
    out << "trial,eta,h,J,D,K,val_mae,status\n";
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return std::string(buf);
    };
    for (const auto& r : rows)
        out << r.trial << ',' << num(r.point.eta) << ',' << r.point.h << ',' << r.point.j << ','
            << r.point.d << ',' << r.point.k << ',' << num(r.val_mae) << ',' << r.status << '\n';
    return out.str();
}

}  // namespace rcvae
