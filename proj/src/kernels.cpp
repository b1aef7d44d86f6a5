#include "ahd/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "ahd/errors.hpp"

namespace ahd::kernels {

void KernelParams::validate() const {
    if (offset_beta < 0) throw Error("offset beta must be >= 0");
    if (!(phi_clip_lo < phi_clip_hi)) throw Error("phi clip bounds inverted");
    if (!(atanh_clip > 0 && atanh_clip < 1)) throw Error("atanh_clip must be in (0,1)");
    if (!(log_eps > 0)) throw Error("log_eps must be > 0");
}

double phi(double x) {
    // -ln(tanh(x/2)); the log1p form avoids cancellation when tanh(x/2) -> 1.
    if (x > 1.0) return -std::log1p(-2.0 / (std::exp(x) + 1.0));
    return -std::log(std::tanh(x / 2.0));
}

namespace {

void check_degree(std::span<const double> in, std::span<double> out) {
    if (in.size() != out.size()) throw LengthMismatch("kernel in/out size mismatch");
    if (in.size() < 2) throw Error("check node degree < 2");
}

void check_finite(std::span<const double> out, const char* who) {
    for (double v : out)
        if (!std::isfinite(v)) throw NumericFault(std::string(who) + " produced non-finite output");
}

class Boxplus final : public CheckNodeKernel {
public:
    explicit Boxplus(const KernelParams& p) : params_(p) { params_.validate(); }

    void update(std::span<const double> in, std::span<double> out) const override {
        check_degree(in, out);
        const std::size_t d = in.size();
        // Leave-one-out product of tanh(L/2), formed directly.
        for (std::size_t j = 0; j < d; ++j) {
            double prod = 1.0;
            for (std::size_t i = 0; i < d; ++i)
                if (i != j) prod *= std::tanh(in[i] / 2.0);
            prod = std::clamp(prod, -params_.atanh_clip, params_.atanh_clip);
            out[j] = 2.0 * std::atanh(prod);
        }
        check_finite(out, "boxplus");
    }
    std::string name() const override { return "boxplus"; }

private:
    KernelParams params_;
};

class BoxplusPhi final : public CheckNodeKernel {
public:
    explicit BoxplusPhi(const KernelParams& p) : params_(p) { params_.validate(); }

    void update(std::span<const double> in, std::span<double> out) const override {
        check_degree(in, out);
        const std::size_t d = in.size();
        // Sign split first, then the self-inverse phi map on magnitudes.
        double phi_total = 0.0;
        int neg_count = 0;
        std::vector<double> phis(d);
        for (std::size_t i = 0; i < d; ++i) {
            if (in[i] < 0) ++neg_count;
            const double mag = std::clamp(std::abs(in[i]), params_.phi_clip_lo, params_.phi_clip_hi);
            phis[i] = phi(mag);
            phi_total += phis[i];
        }
        for (std::size_t j = 0; j < d; ++j) {
            const double sum_excl = phi_total - phis[j];
            const double mag = phi(std::clamp(sum_excl, params_.phi_clip_lo, params_.phi_clip_hi));
            const bool self_neg = in[j] < 0;
            const int sign_neg = neg_count - (self_neg ? 1 : 0);
            out[j] = (sign_neg % 2 == 0) ? mag : -mag;
        }
        check_finite(out, "boxplus-phi");
    }
    std::string name() const override { return "boxplus-phi"; }

private:
    KernelParams params_;
};

class MinSum : public CheckNodeKernel {
public:
    explicit MinSum(double beta = 0.0) : beta_(beta) {
        if (beta < 0) throw Error("offset beta must be >= 0");
    }

    void update(std::span<const double> in, std::span<double> out) const override {
        check_degree(in, out);
        const std::size_t d = in.size();
        // Track the two smallest magnitudes and the overall sign.
        double min1 = 1e300, min2 = 1e300;
        std::size_t min1_idx = 0;
        int neg_count = 0;
        for (std::size_t i = 0; i < d; ++i) {
            if (in[i] < 0) ++neg_count;
            const double mag = std::abs(in[i]);
            if (mag < min1) {
                min2 = min1;
                min1 = mag;
                min1_idx = i;
            } else if (mag < min2) {
                min2 = mag;
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            double mag = (j == min1_idx) ? min2 : min1;
            mag = std::max(mag - beta_, 0.0);
            const bool self_neg = in[j] < 0;
            const int sign_neg = neg_count - (self_neg ? 1 : 0);
            out[j] = (sign_neg % 2 == 0) ? mag : -mag;
        }
    }
    std::string name() const override { return beta_ == 0.0 ? "min-sum" : "offset-min-sum"; }

private:
    double beta_;
};

class Discovered final : public CheckNodeKernel {
public:
    explicit Discovered(const KernelParams& p) : params_(p) { params_.validate(); }

    void update(std::span<const double> in, std::span<double> out) const override {
        check_degree(in, out);
        const std::size_t d = in.size();
        // Sign/magnitude split in the tanh domain, log-domain product,
        // intrinsic removal by division, one clamp at the atanh input.
        std::vector<double> logs(d);
        std::vector<int> signs(d);
        double log_total = 0.0;
        int neg_count = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const double t = std::tanh(in[i] / 2.0);
            signs[i] = (t < 0) ? -1 : 1;
            if (t < 0) ++neg_count;
            logs[i] = std::log(std::abs(t) + params_.log_eps);
            log_total += logs[i];
        }
        const int total_sign = (neg_count % 2 == 0) ? 1 : -1;
        for (std::size_t j = 0; j < d; ++j) {
            const double mag = std::exp(log_total - logs[j]);
            const double signed_mag = mag * total_sign * signs[j];
            const double clamped = std::clamp(signed_mag, -params_.atanh_clip, params_.atanh_clip);
            out[j] = 2.0 * std::atanh(clamped);
        }
        check_finite(out, "discovered");
    }
    std::string name() const override { return "discovered"; }

private:
    KernelParams params_;
};

} // namespace

KernelPtr make_boxplus(const KernelParams& p) { return std::make_shared<Boxplus>(p); }
KernelPtr make_boxplus_phi(const KernelParams& p) { return std::make_shared<BoxplusPhi>(p); }
KernelPtr make_min_sum() { return std::make_shared<MinSum>(); }
KernelPtr make_offset_min_sum(double beta) { return std::make_shared<MinSum>(beta); }
KernelPtr make_discovered(const KernelParams& p) { return std::make_shared<Discovered>(p); }

KernelPtr by_name(const std::string& name, const KernelParams& params) {
    if (name == "boxplus") return make_boxplus(params);
    if (name == "boxplus-phi") return make_boxplus_phi(params);
    if (name == "min-sum") return make_min_sum();
    if (name == "offset-min-sum") return make_offset_min_sum(params.offset_beta);
    if (name == "discovered") return make_discovered(params);
    throw UnknownKernel("unknown kernel: " + name);
}

} // namespace ahd::kernels
