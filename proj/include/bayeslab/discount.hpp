#pragma once

// Discount sequences gamma_k with closed-form tails Gamma_k = sum_{i>=k} gamma_i.

#include <cmath>
#include <cstdlib>
#include <string>

#include "bayeslab/core.hpp"

namespace bayeslab {

class DiscountSequence {
  public:
    enum class Kind { finite, geometric, quadratic };

    /// gamma_k = 1 for k <= m, 0 afterwards.
    static DiscountSequence finite(std::size_t m) { return DiscountSequence(Kind::finite, 0.0, m); }
    /// gamma_k = g^k, 0 < g < 1.
    static DiscountSequence geometric(double g) {
        if (!(g > 0.0 && g < 1.0)) throw ValidationError("discount: geometric factor must lie in (0,1)");
        return DiscountSequence(Kind::geometric, g, 0);
    }
    /// gamma_k = 1 / k^2.
    static DiscountSequence quadratic() { return DiscountSequence(Kind::quadratic, 0.0, 0); }

    /// Parses "finite:m", "geometric:g" or "quadratic".
    static DiscountSequence parse(const std::string& text) {
        const auto colon = text.find(':');
        const std::string kind = text.substr(0, colon);
        const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
        auto bad = [&] { return ValidationError("discount: cannot parse '" + text + "'"); };
        if (kind == "quadratic" && arg.empty()) return quadratic();
        if (arg.empty()) throw bad();
        char* end = nullptr;
        if (kind == "finite") {
            const long long m = std::strtoll(arg.c_str(), &end, 10);
            if (*end != '\0' || m < 1) throw bad();
            return finite(static_cast<std::size_t>(m));
        }
        if (kind == "geometric") {
            const double g = std::strtod(arg.c_str(), &end);
            if (*end != '\0') throw bad();
            return geometric(g);
        }
        throw bad();
    }

    Kind kind() const { return kind_; }
    double factor() const { return factor_; }
    std::size_t horizon() const { return horizon_; }

    std::string describe() const {
        char buf[64];
        switch (kind_) {
            case Kind::finite: return "finite:" + std::to_string(horizon_);
            case Kind::geometric: std::snprintf(buf, sizeof buf, "geometric:%.17g", factor_); return buf;
            case Kind::quadratic: break;
        }
        return "quadratic";
    }

    /// gamma_k for k >= 1.
    double gamma(std::size_t k) const {
        if (k == 0) throw DomainError("discount: cycles start at 1");
        switch (kind_) {
            case Kind::finite: return k <= horizon_ ? 1.0 : 0.0;
            case Kind::geometric: return std::pow(factor_, static_cast<double>(k));
            case Kind::quadratic: break;
        }
        const double kk = static_cast<double>(k);
        return 1.0 / (kk * kk);
    }

    /// gamma_tail: Gamma_k = sum_{i>=k} gamma_i.
    double tail(std::size_t k) const {
        if (k == 0) throw DomainError("discount: cycles start at 1");
        switch (kind_) {
            case Kind::finite: return k <= horizon_ ? static_cast<double>(horizon_ - k + 1) : 0.0;
            case Kind::geometric: return std::pow(factor_, static_cast<double>(k)) / (1.0 - factor_);
            case Kind::quadratic: break;
        }
        return trigamma(static_cast<double>(k));
    }

    // Geometric weights underflow long before cycles become large (0.5^1075 == 0),
    // so values at cycle k are computed with gamma_i and Gamma_i scaled by a
    // common factor s_k: g^k for geometric, 1 otherwise.

    /// gamma_i / s_k, for i >= k.
    double scaled_gamma(std::size_t i, std::size_t k) const {
        if (kind_ != Kind::geometric) return gamma(i);
        if (i < k) throw DomainError("discount: scaled weight before the reference cycle");
        return std::pow(factor_, static_cast<double>(i - k));
    }

    /// Gamma_i / s_k, for i >= k.
    double scaled_tail(std::size_t i, std::size_t k) const {
        if (kind_ != Kind::geometric) return tail(i);
        if (i < k) throw DomainError("discount: scaled tail before the reference cycle");
        return std::pow(factor_, static_cast<double>(i - k)) / (1.0 - factor_);
    }

    /// Gamma_i / Gamma_k for i >= k.
    double tail_ratio(std::size_t i, std::size_t k) const { return scaled_tail(i, k) / scaled_tail(k, k); }

    /// Gamma_k > 0 (only finite sequences run out of mass).
    bool has_mass(std::size_t k) const { return kind_ != Kind::finite || (k >= 1 && k <= horizon_); }

    /// gamma_{k+1} / gamma_k -> 1, the premise for discounted self-optimization.
    bool has_unbounded_effective_horizon() const { return kind_ == Kind::quadratic; }

  private:
    DiscountSequence(Kind kind, double factor, std::size_t horizon) : kind_(kind), factor_(factor), horizon_(horizon) {}

    /// sum_{i>=k} 1/i^2: explicit terms up to k+31, Euler-Maclaurin remainder beyond.
    static double trigamma(double k) {
        constexpr int kDirect = 32;
        const double n = k + kDirect;
        const double n2 = n * n;
        // remainder sum_{i>=n} 1/i^2, truncation error below 1e-20 for n >= 33
        double sum = 1.0 / n + 1.0 / (2.0 * n2) + 1.0 / (6.0 * n2 * n) - 1.0 / (30.0 * n2 * n2 * n) +
                     1.0 / (42.0 * n2 * n2 * n2 * n) - 1.0 / (30.0 * n2 * n2 * n2 * n2 * n);
        for (int i = kDirect - 1; i >= 0; --i) {
            const double x = k + i;
            sum += 1.0 / (x * x);
        }
        return sum;
    }

    Kind kind_;
    double factor_;
    std::size_t horizon_;
};

inline double gamma_tail(const DiscountSequence& d, std::size_t k) { return d.tail(k); }

/// Smallest h >= 0 with sum_{i=k}^{k+h} gamma_i >= Gamma_{k+h+1}: the point at
/// which half of the remaining discount mass has been spent.
inline std::size_t effective_horizon(const DiscountSequence& d, std::size_t k) {
    if (k == 0) throw DomainError("effective_horizon: cycles start at 1");
    if (!d.has_mass(k)) throw DomainError("effective_horizon: no discount mass left at cycle " + std::to_string(k));
    double spent = 0.0;
    for (std::size_t h = 0;; ++h) {
        spent += d.scaled_gamma(k + h, k);
        if (spent >= d.scaled_tail(k + h + 1, k)) return h;
    }
}

/// Smallest m_t >= k with r_max * Gamma_{m_t+1} / Gamma_k <= eps.
inline std::size_t truncation_depth(const DiscountSequence& d, std::size_t k, double eps, double r_max) {
    if (!(eps > 0.0)) throw DomainError("truncation tolerance must be positive");
    if (!d.has_mass(k)) throw DomainError("discount: Gamma_k = 0 at cycle " + std::to_string(k));
    auto ok = [&](std::size_t mt) { return r_max * d.tail_ratio(mt + 1, k) <= eps; };
    if (ok(k)) return k;
    std::size_t lo = k, step = 1;  // ok(lo) false
    std::size_t hi = k + step;
    while (!ok(hi)) {
        lo = hi;
        step *= 2;
        hi = k + step;
        if (step > (std::size_t{1} << 40)) throw BudgetExceeded("discount: truncation depth unbounded");
    }
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

/// Bound on the normalized value mass of cycles k..k+delta-1:
/// r_max (Gamma_k - Gamma_{k+delta}) / Gamma_k.
inline double window_mass_bound(const DiscountSequence& d, std::size_t k, std::size_t delta, double r_max) {
    if (!d.has_mass(k)) throw DomainError("discount: Gamma_k = 0 at cycle " + std::to_string(k));
    return r_max * (1.0 - d.tail_ratio(k + delta, k));
}

}  // namespace bayeslab
