#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "specae/error.hpp"

namespace specae {

// Dense row-major tensor. Real is float for training, double for gradient
// checking. Rank is at most 3 in practice: [batch, features] for the dense
// path and [batch, length, channels] for the convolutional path.
template <class Real>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<Real> values;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), values(count(shape), Real(0)) {}
    Tensor(std::vector<std::size_t> s, std::vector<Real> v)
        : shape(std::move(s)), values(std::move(v)) {
        if (count(shape) != values.size())
            throw ShapeError("tensor: value count " + std::to_string(values.size()) +
                             " does not match shape product " + std::to_string(count(shape)));
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) n *= e;
        return n;
    }

    std::size_t size() const { return values.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    Real* data() { return values.data(); }
    const Real* data() const { return values.data(); }

    Real& operator[](std::size_t i) { return values[i]; }
    Real operator[](std::size_t i) const { return values[i]; }

    // [batch, features]
    Real& at2(std::size_t b, std::size_t j) { return values[b * shape[1] + j]; }
    Real at2(std::size_t b, std::size_t j) const { return values[b * shape[1] + j]; }

    // [batch, length, channels]
    Real& at3(std::size_t b, std::size_t l, std::size_t c) {
        return values[(b * shape[1] + l) * shape[2] + c];
    }
    Real at3(std::size_t b, std::size_t l, std::size_t c) const {
        return values[(b * shape[1] + l) * shape[2] + c];
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    void fill(Real v) { std::fill(values.begin(), values.end(), v); }

    bool all_finite() const {
        for (Real v : values)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <class Other>
    Tensor<Other> cast() const {
        Tensor<Other> out;
        out.shape = shape;
        out.values.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            out.values[i] = static_cast<Other>(values[i]);
        return out;
    }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

template <class Real>
void require_shape(const Tensor<Real>& t, const std::vector<std::size_t>& expect,
                   const char* what) {
    if (t.shape != expect)
        throw ShapeError(std::string(what) + ": expected " + shape_str(expect) + ", got " +
                         shape_str(t.shape));
}

template <class Real>
void require_finite(const Tensor<Real>& t, const char* what) {
    if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace specae
