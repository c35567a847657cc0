#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncce {

class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes don't fit the operation.
class shape_error : public error {
public:
    using error::error;
};

// A domain invariant (span bounds, chain partition, tag sequence, ...) is violated.
class validation_error : public error {
public:
    using error::error;
};

// File/stream level problem (missing file, malformed record, bad checkpoint).
class io_error : public error {
public:
    using error::error;
};

class config_error : public error {
public:
    using error::error;
};

// Dense row-major matrix of 64-bit floats. Vectors are 1xC rows, scalars 1x1.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Tensor row(std::vector<double> values) {
        Tensor t;
        t.rows = 1;
        t.cols = values.size();
        t.data = std::move(values);
        return t;
    }

    static Tensor scalar(double v) { return row({v}); }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return rows * cols; }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

    double item() const {
        if (size() != 1) throw shape_error("item() on non-scalar tensor " + shape_str());
        return data[0];
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline bool operator==(const Tensor& a, const Tensor& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

#ifndef NDEBUG
inline void debug_check_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) throw error(std::string("non-finite value produced by ") + where);
}
#else
inline void debug_check_finite(const Tensor&, const char*) {}
#endif

// Deterministic random source. The mt19937_64 engine output sequence is fixed by
// the standard; the mappings below are our own so results are identical on every
// platform (std::uniform_*_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n). Multiply-shift bounding; bias is O(2^-64).
    std::size_t index(std::size_t n) {
        if (n == 0) throw error("Rng::index on empty range");
        return static_cast<std::size_t>(
            (static_cast<__uint128_t>(next_u64()) * static_cast<__uint128_t>(n)) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Weighted pick over non-negative weights.
    std::size_t weighted(const std::vector<double>& w) {
        double total = 0.0;
        for (double x : w) total += x;
        double r = uniform() * total;
        for (std::size_t i = 0; i < w.size(); ++i) {
            r -= w[i];
            if (r < 0.0) return i;
        }
        return w.size() - 1;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace ncce
