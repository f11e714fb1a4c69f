#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

namespace rodopt {

inline double binomial(int k, int i) {
    if (i < 0 || i > k) return 0.0;
    if (i > k - i) i = k - i;
    if (k <= 20) {
        // exact in 64-bit integers up to C(20,10)
        std::uint64_t num = 1, den = 1;
        for (int j = 1; j <= i; ++j) {
            num *= static_cast<std::uint64_t>(k - i + j);
            den *= static_cast<std::uint64_t>(j);
        }
        return static_cast<double>(num / den);
    }
    return std::exp(std::lgamma(k + 1.0) - std::lgamma(i + 1.0) - std::lgamma(k - i + 1.0));
}

// Bernstein basis B_i^k over [0, length].
inline double bernstein_basis(int i, int k, double s, double length) {
    if (k < 0 || i < 0 || i > k)
        throw std::out_of_range("bernstein_basis: index " + std::to_string(i) +
                                " out of range for degree " + std::to_string(k));
    if (!(length > 0.0))
        throw std::domain_error("bernstein_basis: non-positive interval length");
    if (s < -1e-9 * length || s > length * (1.0 + 1e-9))
        throw std::domain_error("bernstein_basis: argument outside [0, length]");
    const double u = std::min(std::max(s / length, 0.0), 1.0);
    return binomial(k, i) * std::pow(u, i) * std::pow(1.0 - u, k - i);
}

// Square same-degree differentiation matrix for degree-k curves on [0, length],
// built as the degree-lowering derivative composed with elevation back to k.
// For a coefficient column c, derivative coefficients are entries^T * c; for a
// surface net, entries^T * net differentiates in s and net * entries in t.
struct DifferentiationMatrix {
    int order = 0;
    Eigen::MatrixXd entries;  // (order+1) x (order+1)
};

inline DifferentiationMatrix differentiation_matrix(int k, double length) {
    if (k < 0) throw std::invalid_argument("differentiation_matrix: negative degree");
    if (!(length > 0.0)) throw std::domain_error("differentiation_matrix: non-positive length");
    DifferentiationMatrix d;
    d.order = k;
    d.entries = Eigen::MatrixXd::Zero(k + 1, k + 1);
    if (k == 0) return d;
    Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(k, k + 1);  // degree k -> k-1 derivative
    for (int i = 0; i < k; ++i) {
        lower(i, i) = -k / length;
        lower(i, i + 1) = k / length;
    }
    Eigen::MatrixXd elev = Eigen::MatrixXd::Zero(k + 1, k);  // degree k-1 -> k
    for (int j = 0; j <= k; ++j) {
        if (j > 0) elev(j, j - 1) = static_cast<double>(j) / k;
        if (j < k) elev(j, j) = 1.0 - static_cast<double>(j) / k;
    }
    d.entries = (elev * lower).transpose();
    return d;
}

struct QuadratureWeights {
    Eigen::VectorXd ws;  // length m+1, each s_f/(m+1)
    Eigen::VectorXd wt;  // length n+1, each t_f/(n+1)
};

namespace detail {

inline void check_unit_param(double u, const char* what) {
    if (u < -1e-9 || u > 1.0 + 1e-9)
        throw std::domain_error(std::string(what) + ": parameter outside domain");
}

// One de Casteljau pass over a coefficient vector at parameter u in [0,1].
// The convex-combination form is endpoint-exact at u = 0 and u = 1.
inline double de_casteljau(Eigen::VectorXd work, double u) {
    const int k = static_cast<int>(work.size()) - 1;
    const double w = 1.0 - u;
    for (int r = 1; r <= k; ++r)
        for (int i = 0; i <= k - r; ++i)
            work[i] = w * work[i] + u * work[i + 1];
    return work[0];
}

// Left/right subdivision coefficients at u.
inline void de_casteljau_split(const Eigen::VectorXd& c, double u,
                               Eigen::VectorXd& left, Eigen::VectorXd& right) {
    const int k = static_cast<int>(c.size()) - 1;
    const double w = 1.0 - u;
    Eigen::VectorXd work = c;
    left.resize(k + 1);
    right.resize(k + 1);
    left[0] = work[0];
    right[k] = work[k];
    for (int r = 1; r <= k; ++r) {
        for (int i = 0; i <= k - r; ++i)
            work[i] = w * work[i] + u * work[i + 1];
        left[r] = work[0];
        right[k - r] = work[k - r];
    }
}

// Degree elevation of a coefficient vector from degree k to k + r.
inline Eigen::VectorXd elevate_vector(const Eigen::VectorXd& c, int r) {
    const int k = static_cast<int>(c.size()) - 1;
    if (r == 0) return c;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(k + r + 1);
    for (int j = 0; j <= k + r; ++j) {
        const double denom = binomial(k + r, j);
        double acc = 0.0;
        for (int q = std::max(0, j - r); q <= std::min(k, j); ++q)
            acc += c[q] * binomial(k, q) * binomial(r, j - q) / denom;
        out[j] = acc;
    }
    return out;
}

inline Eigen::MatrixXd elevate_rows(const Eigen::MatrixXd& net, int r) {
    if (r == 0) return net;
    Eigen::MatrixXd out(net.rows() + r, net.cols());
    for (int j = 0; j < net.cols(); ++j)
        out.col(j) = elevate_vector(net.col(j), r);
    return out;
}

inline Eigen::MatrixXd elevate_cols(const Eigen::MatrixXd& net, int r) {
    if (r == 0) return net;
    Eigen::MatrixXd out(net.rows(), net.cols() + r);
    for (int i = 0; i < net.rows(); ++i)
        out.row(i) = elevate_vector(net.row(i).transpose(), r).transpose();
    return out;
}

// Univariate Bernstein product coefficients: degrees k and a -> k + a.
inline Eigen::VectorXd product_vector(const Eigen::VectorXd& g, const Eigen::VectorXd& h) {
    const int k = static_cast<int>(g.size()) - 1;
    const int a = static_cast<int>(h.size()) - 1;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(k + a + 1);
    for (int e = 0; e <= k + a; ++e) {
        const double denom = binomial(k + a, e);
        double acc = 0.0;
        for (int q = std::max(0, e - a); q <= std::min(k, e); ++q)
            acc += binomial(k, q) * binomial(a, e - q) / denom * g[q] * h[e - q];
        out[e] = acc;
    }
    return out;
}

}  // namespace detail

template <int Dim>
class BernsteinCurve;

template <int Dim>
class BernsteinSurface;

using ScalarCurve = BernsteinCurve<1>;
using VectorCurve = BernsteinCurve<3>;
using ScalarSurface = BernsteinSurface<1>;
using VectorSurface = BernsteinSurface<3>;

// Univariate Bernstein (Bezier) curve of degree k over [0, length].
// Control values are d-vectors stored channel-wise.
template <int Dim>
class BernsteinCurve {
public:
    static_assert(Dim >= 1);
    using Value = std::conditional_t<Dim == 1, double, Eigen::Matrix<double, Dim, 1>>;

    BernsteinCurve() = default;

    BernsteinCurve(std::array<Eigen::VectorXd, Dim> coeffs, double length)
        : coeffs_(std::move(coeffs)), length_(length) {
        if (!(length_ > 0.0)) throw std::domain_error("BernsteinCurve: non-positive length");
        for (int d = 0; d < Dim; ++d) {
            if (coeffs_[d].size() != coeffs_[0].size() || coeffs_[d].size() == 0)
                throw std::invalid_argument("BernsteinCurve: inconsistent coefficient sizes");
            if (!coeffs_[d].allFinite())
                throw std::invalid_argument("BernsteinCurve: non-finite coefficient");
        }
    }

    static BernsteinCurve constant(const Value& value, int degree, double length) {
        std::array<Eigen::VectorXd, Dim> c;
        for (int d = 0; d < Dim; ++d)
            c[d] = Eigen::VectorXd::Constant(degree + 1, component(value, d));
        return BernsteinCurve(std::move(c), length);
    }

    int degree() const { return static_cast<int>(coeffs_[0].size()) - 1; }
    double length() const { return length_; }
    const Eigen::VectorXd& channel(int d) const { return coeffs_[d]; }

    Value point(int i) const {
        Value v{};
        for (int d = 0; d < Dim; ++d) set_component(v, d, coeffs_[d][i]);
        return v;
    }

    Value eval(double t) const {
        const double u = normalized(t);
        Value v{};
        for (int d = 0; d < Dim; ++d) set_component(v, d, detail::de_casteljau(coeffs_[d], u));
        return v;
    }

    // Direct basis summation; cross-check oracle for eval().
    Value eval_direct(double t) const {
        const int k = degree();
        Value v{};
        for (int d = 0; d < Dim; ++d) {
            double acc = 0.0;
            for (int i = 0; i <= k; ++i) acc += coeffs_[d][i] * bernstein_basis(i, k, t, length_);
            set_component(v, d, acc);
        }
        return v;
    }

    BernsteinCurve derivative() const {
        const DifferentiationMatrix d = differentiation_matrix(degree(), length_);
        std::array<Eigen::VectorXd, Dim> out;
        for (int ch = 0; ch < Dim; ++ch) out[ch] = d.entries.transpose() * coeffs_[ch];
        return BernsteinCurve(std::move(out), length_);
    }

    BernsteinCurve elevated(int degree2) const {
        if (degree2 < degree())
            throw std::invalid_argument("BernsteinCurve: target degree below current");
        std::array<Eigen::VectorXd, Dim> out;
        for (int ch = 0; ch < Dim; ++ch)
            out[ch] = detail::elevate_vector(coeffs_[ch], degree2 - degree());
        return BernsteinCurve(std::move(out), length_);
    }

    BernsteinCurve operator+(const BernsteinCurve& o) const { return combined(o, +1.0); }
    BernsteinCurve operator-(const BernsteinCurve& o) const { return combined(o, -1.0); }

    friend ScalarCurve multiply(const BernsteinCurve& g, const BernsteinCurve& h)
        requires(Dim == 1)
    {
        if (std::abs(g.length_ - h.length_) > 1e-12 * std::max(g.length_, h.length_))
            throw std::invalid_argument("multiply: curve domain mismatch");
        std::array<Eigen::VectorXd, 1> out{detail::product_vector(g.coeffs_[0], h.coeffs_[0])};
        return ScalarCurve(std::move(out), g.length_);
    }

    double integrate() const
        requires(Dim == 1)
    {
        return coeffs_[0].sum() * length_ / static_cast<double>(degree() + 1);
    }

    std::pair<double, double> coeff_bounds() const
        requires(Dim == 1)
    {
        return {coeffs_[0].minCoeff(), coeffs_[0].maxCoeff()};
    }

private:
    static double component(const Value& v, int d) {
        if constexpr (Dim == 1)
            return v;
        else
            return v[d];
    }
    static void set_component(Value& v, int d, double x) {
        if constexpr (Dim == 1)
            v = x;
        else
            v[d] = x;
    }

    BernsteinCurve combined(const BernsteinCurve& o, double sign) const {
        if (std::abs(length_ - o.length_) > 1e-12 * std::max(length_, o.length_))
            throw std::invalid_argument("BernsteinCurve: domain mismatch");
        const int k = std::max(degree(), o.degree());
        BernsteinCurve a = elevated(k), b = o.elevated(k);
        std::array<Eigen::VectorXd, Dim> out;
        for (int ch = 0; ch < Dim; ++ch) out[ch] = a.coeffs_[ch] + sign * b.coeffs_[ch];
        return BernsteinCurve(std::move(out), length_);
    }

    std::array<Eigen::VectorXd, Dim> coeffs_;
    double length_ = 1.0;

    double normalized(double t) const {
        if (t < -1e-9 * length_ || t > length_ * (1.0 + 1e-9))
            throw std::domain_error("BernsteinCurve: argument outside [0, length]");
        return std::min(std::max(t / length_, 0.0), 1.0);
    }
};

inline ScalarCurve norm_sq(const VectorCurve& c) {
    std::array<Eigen::VectorXd, 1> x{c.channel(0)}, y{c.channel(1)}, z{c.channel(2)};
    ScalarCurve cx(std::move(x), c.length()), cy(std::move(y), c.length()),
        cz(std::move(z), c.length());
    return multiply(cx, cx) + multiply(cy, cy) + multiply(cz, cz);
}

enum class SurfaceAxis { S, T };
enum class SurfaceEdge { SMin, SMax, TMin, TMax };

// Tensor-product Bernstein surface of degrees (m, n) over [0,s_f] x [0,t_f].
// net(i, j) holds the control value with s-index i and t-index j.
template <int Dim>
class BernsteinSurface {
public:
    static_assert(Dim >= 1);
    using Value = std::conditional_t<Dim == 1, double, Eigen::Matrix<double, Dim, 1>>;

    BernsteinSurface() = default;

    BernsteinSurface(std::array<Eigen::MatrixXd, Dim> nets, double s_f, double t_f)
        : nets_(std::move(nets)), sf_(s_f), tf_(t_f) {
        if (!(sf_ > 0.0) || !(tf_ > 0.0))
            throw std::domain_error("BernsteinSurface: non-positive domain length");
        for (int d = 0; d < Dim; ++d) {
            if (nets_[d].rows() != nets_[0].rows() || nets_[d].cols() != nets_[0].cols() ||
                nets_[d].size() == 0)
                throw std::invalid_argument("BernsteinSurface: inconsistent net shapes");
            if (!nets_[d].allFinite())
                throw std::invalid_argument("BernsteinSurface: non-finite control value");
        }
    }

    static BernsteinSurface zero(int m, int n, double s_f, double t_f) {
        std::array<Eigen::MatrixXd, Dim> nets;
        for (int d = 0; d < Dim; ++d) nets[d] = Eigen::MatrixXd::Zero(m + 1, n + 1);
        return BernsteinSurface(std::move(nets), s_f, t_f);
    }

    static BernsteinSurface constant(const Value& value, int m, int n, double s_f, double t_f) {
        std::array<Eigen::MatrixXd, Dim> nets;
        for (int d = 0; d < Dim; ++d)
            nets[d] = Eigen::MatrixXd::Constant(m + 1, n + 1, component(value, d));
        return BernsteinSurface(std::move(nets), s_f, t_f);
    }

    int degree_s() const { return static_cast<int>(nets_[0].rows()) - 1; }
    int degree_t() const { return static_cast<int>(nets_[0].cols()) - 1; }
    double domain_s() const { return sf_; }
    double domain_t() const { return tf_; }
    const Eigen::MatrixXd& net(int d = 0) const { return nets_[d]; }
    Eigen::MatrixXd& net(int d = 0) { return nets_[d]; }

    Value point(int i, int j) const {
        Value v{};
        for (int d = 0; d < Dim; ++d) set_component(v, d, nets_[d](i, j));
        return v;
    }

    // Tensor de Casteljau evaluation.
    Value eval(double s, double t) const {
        const double us = normalized(s, sf_, "s");
        const double ut = normalized(t, tf_, "t");
        Value v{};
        for (int d = 0; d < Dim; ++d) {
            Eigen::VectorXd tmp(nets_[d].cols());
            for (int j = 0; j < nets_[d].cols(); ++j)
                tmp[j] = detail::de_casteljau(nets_[d].col(j), us);
            set_component(v, d, detail::de_casteljau(tmp, ut));
        }
        return v;
    }

    // Direct summation over the basis; retained as the cross-check oracle.
    Value eval_direct(double s, double t) const {
        const int m = degree_s(), n = degree_t();
        Eigen::VectorXd bs(m + 1), bt(n + 1);
        for (int i = 0; i <= m; ++i) bs[i] = bernstein_basis(i, m, s, sf_);
        for (int j = 0; j <= n; ++j) bt[j] = bernstein_basis(j, n, t, tf_);
        Value v{};
        for (int d = 0; d < Dim; ++d) set_component(v, d, bs.dot(nets_[d] * bt));
        return v;
    }

    BernsteinSurface diff_s() const {
        const DifferentiationMatrix d = differentiation_matrix(degree_s(), sf_);
        std::array<Eigen::MatrixXd, Dim> out;
        for (int ch = 0; ch < Dim; ++ch) out[ch] = d.entries.transpose() * nets_[ch];
        return BernsteinSurface(std::move(out), sf_, tf_);
    }

    BernsteinSurface diff_t() const {
        const DifferentiationMatrix d = differentiation_matrix(degree_t(), tf_);
        std::array<Eigen::MatrixXd, Dim> out;
        for (int ch = 0; ch < Dim; ++ch) out[ch] = nets_[ch] * d.entries;
        return BernsteinSurface(std::move(out), sf_, tf_);
    }

    BernsteinSurface degree_elevated(int m2, int n2) const {
        if (m2 < degree_s() || n2 < degree_t())
            throw std::invalid_argument("degree_elevated: target degree below current");
        std::array<Eigen::MatrixXd, Dim> out;
        for (int ch = 0; ch < Dim; ++ch)
            out[ch] = detail::elevate_cols(detail::elevate_rows(nets_[ch], m2 - degree_s()),
                                           n2 - degree_t());
        return BernsteinSurface(std::move(out), sf_, tf_);
    }

    // de Casteljau split; each piece lives on its own [0, len] subdomain.
    std::pair<BernsteinSurface, BernsteinSurface> split(SurfaceAxis axis, double lambda) const {
        if (!(lambda > 0.0 && lambda < 1.0))
            throw std::domain_error("split: lambda must lie strictly inside (0,1)");
        std::array<Eigen::MatrixXd, Dim> ln, rn;
        for (int ch = 0; ch < Dim; ++ch) {
            const Eigen::MatrixXd& net = nets_[ch];
            ln[ch].resizeLike(net);
            rn[ch].resizeLike(net);
            Eigen::VectorXd l, r;
            if (axis == SurfaceAxis::S) {
                for (int j = 0; j < net.cols(); ++j) {
                    detail::de_casteljau_split(net.col(j), lambda, l, r);
                    ln[ch].col(j) = l;
                    rn[ch].col(j) = r;
                }
            } else {
                for (int i = 0; i < net.rows(); ++i) {
                    detail::de_casteljau_split(net.row(i).transpose(), lambda, l, r);
                    ln[ch].row(i) = l.transpose();
                    rn[ch].row(i) = r.transpose();
                }
            }
        }
        if (axis == SurfaceAxis::S)
            return {BernsteinSurface(std::move(ln), lambda * sf_, tf_),
                    BernsteinSurface(std::move(rn), (1.0 - lambda) * sf_, tf_)};
        return {BernsteinSurface(std::move(ln), sf_, lambda * tf_),
                BernsteinSurface(std::move(rn), sf_, (1.0 - lambda) * tf_)};
    }

    BernsteinCurve<Dim> edge(SurfaceEdge which) const {
        std::array<Eigen::VectorXd, Dim> c;
        for (int ch = 0; ch < Dim; ++ch) {
            switch (which) {
                case SurfaceEdge::TMin: c[ch] = nets_[ch].col(0); break;
                case SurfaceEdge::TMax: c[ch] = nets_[ch].col(degree_t()); break;
                case SurfaceEdge::SMin: c[ch] = nets_[ch].row(0).transpose(); break;
                case SurfaceEdge::SMax: c[ch] = nets_[ch].row(degree_s()).transpose(); break;
            }
        }
        const bool along_s = (which == SurfaceEdge::TMin || which == SurfaceEdge::TMax);
        return BernsteinCurve<Dim>(std::move(c), along_s ? sf_ : tf_);
    }

    BernsteinSurface operator+(const BernsteinSurface& o) const { return combined(o, +1.0); }
    BernsteinSurface operator-(const BernsteinSurface& o) const { return combined(o, -1.0); }

    // Coefficient product per the bivariate Bernstein product rule; degrees add.
    friend ScalarSurface multiply(const BernsteinSurface& g, const BernsteinSurface& h)
        requires(Dim == 1)
    {
        if (std::abs(g.sf_ - h.sf_) > 1e-12 * std::max(g.sf_, h.sf_) ||
            std::abs(g.tf_ - h.tf_) > 1e-12 * std::max(g.tf_, h.tf_))
            throw std::invalid_argument("multiply: surface domain mismatch");
        const int m = g.degree_s(), n = g.degree_t();
        const int a = h.degree_s(), b = h.degree_t();
        const Eigen::MatrixXd& gn = g.nets_[0];
        const Eigen::MatrixXd& hn = h.nets_[0];
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m + a + 1, n + b + 1);
        for (int e = 0; e <= m + a; ++e) {
            for (int f = 0; f <= n + b; ++f) {
                const double denom = binomial(m + a, e) * binomial(n + b, f);
                double acc = 0.0;
                for (int q = std::max(0, e - a); q <= std::min(m, e); ++q) {
                    const double cq = binomial(m, q) * binomial(a, e - q);
                    for (int r = std::max(0, f - b); r <= std::min(n, f); ++r)
                        acc += cq * binomial(n, r) * binomial(b, f - r) * gn(q, r) *
                               hn(e - q, f - r);
                }
                out(e, f) = acc / denom;
            }
        }
        return ScalarSurface({out}, g.sf_, g.tf_);
    }

    std::pair<double, double> coeff_bounds() const
        requires(Dim == 1)
    {
        return {nets_[0].minCoeff(), nets_[0].maxCoeff()};
    }

    // Quadrature over the basis: exact for the surface's own expansion.
    double integrate() const
        requires(Dim == 1)
    {
        const double ws = sf_ / static_cast<double>(degree_s() + 1);
        const double wt = tf_ / static_cast<double>(degree_t() + 1);
        return ws * wt * nets_[0].sum();
    }

    ScalarSurface channel_surface(int d) const {
        return ScalarSurface({nets_[d]}, sf_, tf_);
    }

private:
    static double component(const Value& v, int d) {
        if constexpr (Dim == 1)
            return v;
        else
            return v[d];
    }
    static void set_component(Value& v, int d, double x) {
        if constexpr (Dim == 1)
            v = x;
        else
            v[d] = x;
    }

    static double normalized(double x, double len, const char* axis) {
        if (x < -1e-9 * len || x > len * (1.0 + 1e-9))
            throw std::domain_error(std::string("BernsteinSurface: ") + axis +
                                    " argument outside domain");
        return std::min(std::max(x / len, 0.0), 1.0);
    }

    BernsteinSurface combined(const BernsteinSurface& o, double sign) const {
        if (std::abs(sf_ - o.sf_) > 1e-12 * std::max(sf_, o.sf_) ||
            std::abs(tf_ - o.tf_) > 1e-12 * std::max(tf_, o.tf_))
            throw std::invalid_argument("BernsteinSurface: domain mismatch");
        const int m = std::max(degree_s(), o.degree_s());
        const int n = std::max(degree_t(), o.degree_t());
        BernsteinSurface a = degree_elevated(m, n), b = o.degree_elevated(m, n);
        std::array<Eigen::MatrixXd, Dim> out;
        for (int ch = 0; ch < Dim; ++ch) out[ch] = a.nets_[ch] + sign * b.nets_[ch];
        return BernsteinSurface(std::move(out), sf_, tf_);
    }

    std::array<Eigen::MatrixXd, Dim> nets_;
    double sf_ = 1.0;
    double tf_ = 1.0;
};

inline QuadratureWeights quadrature_weights(int m, int n, double s_f, double t_f) {
    QuadratureWeights q;
    q.ws = Eigen::VectorXd::Constant(m + 1, s_f / static_cast<double>(m + 1));
    q.wt = Eigen::VectorXd::Constant(n + 1, t_f / static_cast<double>(n + 1));
    return q;
}

// ||f||^2 as a degree-(2m,2n) surface from three equal-shape scalar surfaces.
inline ScalarSurface norm_sq(const ScalarSurface& fx, const ScalarSurface& fy,
                             const ScalarSurface& fz) {
    if (fx.degree_s() != fy.degree_s() || fx.degree_s() != fz.degree_s() ||
        fx.degree_t() != fy.degree_t() || fx.degree_t() != fz.degree_t())
        throw std::invalid_argument("norm_sq: component degree mismatch");
    return multiply(fx, fx) + multiply(fy, fy) + multiply(fz, fz);
}

inline ScalarSurface norm_sq(const VectorSurface& f) {
    return norm_sq(f.channel_surface(0), f.channel_surface(1), f.channel_surface(2));
}

}  // namespace rodopt
