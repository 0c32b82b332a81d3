#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace isn {

using Vec = std::vector<double>;

// Dense row-major matrix. Nets in this library are tiny (tens of nodes), so a
// plain vector-backed matrix beats pulling in a linear algebra dependency.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
    size_t size() const { return data.size(); }
};

// Half-open index range [begin, end) designating a slice of a vector.
struct IndexRange {
    int begin = 0;
    int end = 0;
    int size() const { return end - begin; }
};

// Error hierarchy. Every error carries a stable category string so the CLI
// can map failures to machine-readable exit codes.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}
    const std::string& category() const { return category_; }

private:
    std::string category_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& m) : Error("domain", m) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& m) : Error("parse", m) {}
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& m) : Error("divergence", m) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error("io", m) {}
};

inline void require(bool cond, const std::string& message) {
    if (!cond) throw ShapeError(message);
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Matrix& m) {
    for (double x : m.data)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double mean(const Vec& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(const Vec& v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

// Standard error of the sample mean.
inline double standard_error(const Vec& v) {
    if (v.size() < 2) return 0.0;
    return std::sqrt(variance(v) / static_cast<double>(v.size()));
}

inline double median(Vec v) {
    if (v.empty()) throw DomainError("median of empty sample");
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// FNV-1a, used for config hashes and manifest stamps.
inline uint64_t fnv1a_hash(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace isn
