#ifndef AHD_KERNELS_HPP
#define AHD_KERNELS_HPP

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ahd::kernels {

/// Stability constants shared by the check-node update rules.
struct KernelParams {
    double offset_beta = 0.5;
    double phi_clip_lo = 8.5e-8;
    double phi_clip_hi = 16.6;
    double atanh_clip = 1.0 - 1e-7;
    double log_eps = 1e-12;

    void validate() const;
};

/// One check-node update: incoming v2c messages in, extrinsic c2v out.
/// Implementations are pure and safe to call concurrently.
class CheckNodeKernel {
public:
    virtual ~CheckNodeKernel() = default;
    virtual void update(std::span<const double> in, std::span<double> out) const = 0;
    virtual std::string name() const = 0;

    /// Called once at the start of each decode_batch; resource-metered
    /// kernels reset their per-decode budget here.
    virtual void begin_decode() const {}
};

using KernelPtr = std::shared_ptr<const CheckNodeKernel>;

KernelPtr make_boxplus(const KernelParams& params = {});
KernelPtr make_boxplus_phi(const KernelParams& params = {});
KernelPtr make_min_sum();
KernelPtr make_offset_min_sum(double beta);
KernelPtr make_discovered(const KernelParams& params = {});

/// phi(x) = -ln(tanh(x/2)), self-inverse on (0, inf).
double phi(double x);

/// Lookup by name: "boxplus", "boxplus-phi", "min-sum", "offset-min-sum",
/// "discovered". Script kernels ("script:<id>") are resolved by the caller.
KernelPtr by_name(const std::string& name, const KernelParams& params = {});

} // namespace ahd::kernels

#endif
