#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace iscc {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Rng = std::mt19937_64;

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SingularityError : public std::runtime_error {
public:
    SingularityError(int k, int m, const std::string& what)
        : std::runtime_error(what), device(k), element(m) {}
    int device;
    int element;
};

class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/*! splitmix64 finalizer, used to derive independent seeds from (seed, ids). */
inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0)
{
    return mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c);
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0)
{
    return Rng(derive_seed(seed, a, b, c));
}

/*! Circularly symmetric complex normal with E|z|^2 = var. */
inline cplx complex_normal(Rng& rng, double var = 1.0)
{
    std::normal_distribution<double> n(0.0, std::sqrt(var / 2.0));
    double re = n(rng);
    double im = n(rng);
    return {re, im};
}

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw DomainError(msg);
}

inline void require_shape(bool cond, const std::string& msg)
{
    if (!cond) throw ShapeError(msg);
}

} // namespace iscc
