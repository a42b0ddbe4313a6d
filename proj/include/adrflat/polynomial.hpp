#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace adrflat {

// Univariate real polynomial in the differential operator s.
// Coefficients are stored in ascending powers; trailing zeros are trimmed so
// the zero polynomial has an empty coefficient list and no degree.
class Polynomial {
public:
    Polynomial() = default;
    Polynomial(std::initializer_list<double> coeffs) : coeffs_(coeffs) { trim(); }
    explicit Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) { trim(); }

    static Polynomial constant(double c) { return Polynomial(std::vector<double>{c}); }
    static Polynomial monomial(std::size_t power, double c = 1.0) {
        std::vector<double> v(power + 1, 0.0);
        v[power] = c;
        return Polynomial(std::move(v));
    }

    [[nodiscard]] bool is_zero() const noexcept { return coeffs_.empty(); }
    [[nodiscard]] std::optional<std::size_t> degree() const noexcept {
        if (coeffs_.empty())
            return std::nullopt;
        return coeffs_.size() - 1;
    }
    [[nodiscard]] std::span<const double> coeffs() const noexcept { return coeffs_; }

    // Coefficient of s^i; zero beyond the stored range.
    [[nodiscard]] double operator[](std::size_t i) const noexcept {
        return i < coeffs_.size() ? coeffs_[i] : 0.0;
    }

    [[nodiscard]] double leading() const noexcept { return coeffs_.empty() ? 0.0 : coeffs_.back(); }

    [[nodiscard]] bool is_constant() const noexcept { return coeffs_.size() <= 1; }

    [[nodiscard]] double max_abs_coeff() const noexcept {
        double m = 0.0;
        for (double c : coeffs_)
            m = std::max(m, std::abs(c));
        return m;
    }

    // Evaluates at a real point (Horner).
    [[nodiscard]] double operator()(double s) const noexcept {
        double acc = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it)
            acc = acc * s + *it;
        return acc;
    }

    // Formal derivative d/ds.
    [[nodiscard]] Polynomial derivative() const {
        if (coeffs_.size() <= 1)
            return {};
        std::vector<double> v(coeffs_.size() - 1);
        for (std::size_t i = 1; i < coeffs_.size(); ++i)
            v[i - 1] = coeffs_[i] * static_cast<double>(i);
        return Polynomial(std::move(v));
    }

    // Multiplication by s^n: the "shift" that turns q(s)y into q(s)(s y).
    [[nodiscard]] Polynomial shifted(std::size_t n) const {
        if (is_zero())
            return {};
        std::vector<double> v(coeffs_.size() + n, 0.0);
        std::copy(coeffs_.begin(), coeffs_.end(), v.begin() + static_cast<std::ptrdiff_t>(n));
        return Polynomial(std::move(v));
    }

    Polynomial& operator+=(const Polynomial& rhs) {
        if (rhs.coeffs_.size() > coeffs_.size())
            coeffs_.resize(rhs.coeffs_.size(), 0.0);
        for (std::size_t i = 0; i < rhs.coeffs_.size(); ++i)
            coeffs_[i] += rhs.coeffs_[i];
        trim();
        return *this;
    }
    Polynomial& operator-=(const Polynomial& rhs) { return *this += -rhs; }
    Polynomial& operator*=(double c) {
        for (double& x : coeffs_)
            x *= c;
        trim();
        return *this;
    }

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, double c) { return a *= c; }
    friend Polynomial operator*(double c, Polynomial a) { return a *= c; }
    friend Polynomial operator-(Polynomial a) { return a *= -1.0; }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        if (a.is_zero() || b.is_zero())
            return {};
        std::vector<double> v(a.coeffs_.size() + b.coeffs_.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
            for (std::size_t j = 0; j < b.coeffs_.size(); ++j)
                v[i + j] += a.coeffs_[i] * b.coeffs_[j];
        return Polynomial(std::move(v));
    }

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

    [[nodiscard]] std::string to_string() const {
        std::ostringstream os;
        os.precision(12);
        if (coeffs_.empty())
            return "0";
        for (std::size_t i = 0; i < coeffs_.size(); ++i) {
            if (i)
                os << ' ';
            os << coeffs_[i];
        }
        return os.str();
    }

private:
    void trim() {
        while (!coeffs_.empty() && coeffs_.back() == 0.0)
            coeffs_.pop_back();
    }

    std::vector<double> coeffs_;
};

struct PolyDivision {
    Polynomial quotient;
    Polynomial remainder;
};

// Euclidean division num = q * den + r with deg r < deg den.
[[nodiscard]] inline PolyDivision divide(const Polynomial& num, const Polynomial& den) {
    if (den.is_zero())
        throw Error(ErrorCode::SingularChannel, "polynomial division by the zero polynomial");
    const std::size_t dd = *den.degree();
    if (num.is_zero() || *num.degree() < dd)
        return {Polynomial{}, num};
    std::vector<double> rem(num.coeffs().begin(), num.coeffs().end());
    std::vector<double> quo(rem.size() - dd, 0.0);
    const double lead = den.leading();
    for (std::size_t i = quo.size(); i-- > 0;) {
        const double c = rem[i + dd] / lead;
        quo[i] = c;
        for (std::size_t j = 0; j <= dd; ++j)
            rem[i + j] -= c * den[j];
        rem[i + dd] = 0.0;
    }
    rem.resize(dd);
    return {Polynomial(std::move(quo)), Polynomial(std::move(rem))};
}

// Applies pol(s) to a signal known through its derivative stack
// (signal, signal', signal'', ...): sum_i coeffs[i] * derivs[i].
[[nodiscard]] inline double poly_eval_derivative_chain(const Polynomial& pol, std::span<const double> derivs) {
    const auto deg = pol.degree();
    if (!deg)
        return 0.0;
    if (derivs.size() < *deg + 1)
        throw Error(ErrorCode::InsufficientDerivatives,
                    "polynomial of degree " + std::to_string(*deg) + " needs " + std::to_string(*deg + 1) +
                        " derivatives, stack has " + std::to_string(derivs.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i <= *deg; ++i)
        acc += pol[i] * derivs[i];
    return acc;
}

// Rectangular matrix of polynomials.
class PolyMatrix {
public:
    PolyMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), cells_(rows * cols) {
        if (rows == 0 || cols == 0)
            throw Error(ErrorCode::DimensionMismatch, "PolyMatrix dimensions must be positive");
    }
    PolyMatrix(std::size_t rows, std::size_t cols, std::vector<Polynomial> cells)
        : rows_(rows), cols_(cols), cells_(std::move(cells)) {
        if (rows == 0 || cols == 0 || cells_.size() != rows * cols)
            throw Error(ErrorCode::DimensionMismatch, "PolyMatrix cell count does not match dimensions");
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    [[nodiscard]] Polynomial& operator()(std::size_t r, std::size_t c) { return cells_[r * cols_ + c]; }
    [[nodiscard]] const Polynomial& operator()(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }

    [[nodiscard]] bool is_zero() const {
        return std::all_of(cells_.begin(), cells_.end(), [](const Polynomial& p) { return p.is_zero(); });
    }

    [[nodiscard]] std::size_t max_degree() const {
        std::size_t d = 0;
        for (const auto& p : cells_)
            if (p.degree())
                d = std::max(d, *p.degree());
        return d;
    }

    [[nodiscard]] double max_abs_coeff() const {
        double m = 0.0;
        for (const auto& p : cells_)
            m = std::max(m, p.max_abs_coeff());
        return m;
    }

    [[nodiscard]] PolyMatrix transpose() const {
        PolyMatrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c)
                t(c, r) = (*this)(r, c);
        return t;
    }

    friend PolyMatrix operator*(const PolyMatrix& a, const PolyMatrix& b) {
        if (a.cols_ != b.rows_)
            throw Error(ErrorCode::DimensionMismatch, "PolyMatrix product with inner dimensions " +
                                                          std::to_string(a.cols_) + " and " + std::to_string(b.rows_));
        PolyMatrix out(a.rows_, b.cols_);
        for (std::size_t r = 0; r < a.rows_; ++r)
            for (std::size_t c = 0; c < b.cols_; ++c) {
                Polynomial acc;
                for (std::size_t k = 0; k < a.cols_; ++k)
                    acc += a(r, k) * b(k, c);
                out(r, c) = std::move(acc);
            }
        return out;
    }

    friend PolyMatrix operator+(const PolyMatrix& a, const PolyMatrix& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
            throw Error(ErrorCode::DimensionMismatch, "PolyMatrix sum of mismatched shapes");
        PolyMatrix out(a.rows_, a.cols_);
        for (std::size_t i = 0; i < a.cells_.size(); ++i)
            out.cells_[i] = a.cells_[i] + b.cells_[i];
        return out;
    }

    friend PolyMatrix operator*(const PolyMatrix& a, const Polynomial& p) {
        PolyMatrix out = a;
        for (auto& cell : out.cells_)
            cell = cell * p;
        return out;
    }

    static PolyMatrix identity(std::size_t n) {
        PolyMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = Polynomial::constant(1.0);
        return m;
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<Polynomial> cells_;
};

} // namespace adrflat
