#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ethladder {

using Vec  = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat  = Eigen::MatrixXd;
using Complex = std::complex<double>;

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct dimension_error : error { using error::error; };
struct sector_error : error { using error::error; };
struct state_error : error { using error::error; };
struct shell_error : error { using error::error; };
struct degenerate_observable_error : error { using error::error; };
struct bounds_error : error { using error::error; };
struct plan_error : error { using error::error; };
struct accuracy_error : error { using error::error; };
struct tuning_error : error { using error::error; };
struct window_error : error { using error::error; };
struct unfolding_error : error { using error::error; };
struct spacing_error : error { using error::error; };
struct averaging_window_error : error { using error::error; };
struct domain_error : error { using error::error; };
struct io_error : error { using error::error; };
struct config_error : error { using error::error; };

// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

// splitmix64; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return mix_seed(a ^ mix_seed(b));
}

} // namespace ethladder
