#pragma once

// Weight families on R^d (locally integrable, a.e. positive), their cube
// measures w(Q) = int_Q w dx, and Muckenhoupt A_p diagnostics.
//
// Cube measures pick the strongest available path per family:
//   closed form     Constant (any d), RadialPower in d=1, ProductPower with
//                   every block one-dimensional, and anything reducible to
//                   those (powers/products within one catalog family).
//   semi-analytic   radially symmetric integrands in d=2 (RadialPower,
//                   sphere-distance weights): exact radial antiderivative
//                   composed with an adaptive angular integral over the
//                   polar image of the box, with analytic breakpoints.
//   quadrature      graded adaptive Gauss-Legendre with tanh-sinh node maps
//                   toward declared point/hyperplane singularities.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "embedkit/common.hpp"
#include "embedkit/quadrature.hpp"

namespace embedkit::weights {

// ---------------------------------------------------------------------------
// Manifolds for distance weights
// ---------------------------------------------------------------------------

struct Manifold {
  enum class Shape { Sphere, Circle3d };
  Shape shape = Shape::Sphere;
  std::vector<double> center;
  double radius = 1.0;
  std::vector<double> normal;  // Circle3d carrying-plane normal (unit)

  int codim(int d) const { return shape == Shape::Sphere ? 1 : d - 1; }

  static Manifold sphere(std::vector<double> center, double radius) {
    if (radius <= 0) throw InvalidSpec("Manifold: radius must be positive");
    Manifold m;
    m.shape = Shape::Sphere;
    m.center = std::move(center);
    m.radius = radius;
    return m;
  }

  static Manifold circle3d(std::vector<double> center, double radius,
                           std::vector<double> normal = {0.0, 0.0, 1.0}) {
    if (radius <= 0) throw InvalidSpec("Manifold: radius must be positive");
    if (center.size() != 3 || normal.size() != 3)
      throw InvalidSpec("Manifold: circle3d lives in R^3");
    double n = std::sqrt(normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]);
    if (n <= 0) throw InvalidSpec("Manifold: zero normal");
    for (auto& v : normal) v /= n;
    Manifold m;
    m.shape = Shape::Circle3d;
    m.center = std::move(center);
    m.radius = radius;
    m.normal = std::move(normal);
    return m;
  }

  double distance(std::span<const double> x) const {
    if (shape == Shape::Sphere) {
      double r2 = 0.0;
      for (std::size_t i = 0; i < center.size(); ++i) {
        double dx = x[i] - center[i];
        r2 += dx * dx;
      }
      return std::abs(std::sqrt(r2) - radius);
    }
    // Circle: split x - c into components parallel/orthogonal to the plane.
    double v[3] = {x[0] - center[0], x[1] - center[1], x[2] - center[2]};
    double a = v[0] * normal[0] + v[1] * normal[1] + v[2] * normal[2];
    double perp2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      double pi = v[i] - a * normal[i];
      perp2 += pi * pi;
    }
    double dr = std::sqrt(perp2) - radius;
    return std::sqrt(dr * dr + a * a);
  }

  bool same_geometry(const Manifold& o, double tol = 1e-12) const {
    if (shape != o.shape || center.size() != o.center.size()) return false;
    if (std::abs(radius - o.radius) > tol) return false;
    for (std::size_t i = 0; i < center.size(); ++i)
      if (std::abs(center[i] - o.center[i]) > tol) return false;
    if (shape == Shape::Circle3d)
      for (std::size_t i = 0; i < 3; ++i)
        if (std::abs(normal[i] - o.normal[i]) > tol) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Weight families
// ---------------------------------------------------------------------------

struct ConstantW {
  double c = 1.0;
};

// |x|^alpha near the origin (|x| <= 1), |x|^beta at infinity (|x| > 1).
struct RadialPowerW {
  double alpha = 0.0, beta = 0.0;
};

// w(x, y) = radial power of x in R^n, constant in y in R^k; d = n + k.
struct PartialRadialPowerW {
  int n = 1, k = 0;
  double alpha = 0.0, beta = 0.0;
};

// prod_j |pi_{d_j} x|^{alpha_j} over consecutive coordinate blocks.
struct ProductPowerW {
  std::vector<int> dims;
  std::vector<double> alphas;
};

struct DistancePowerW {
  Manifold manifold;
  double gamma = 0.0;
};

struct CustomW {
  std::function<double(std::span<const double>)> eval;
  quad::SingularSet singular;
  std::string label = "custom";
};

enum class Family { Constant, RadialPower, PartialRadialPower, ProductPower, DistancePower, Custom };

class Weight {
 public:
  using Variant =
      std::variant<ConstantW, RadialPowerW, PartialRadialPowerW, ProductPowerW, DistancePowerW, CustomW>;

  static Weight constant(int d, double c = 1.0) {
    if (c <= 0) throw InvalidSpec("Weight: constant must be positive");
    return Weight(d, ConstantW{c});
  }

  static Weight radial_power(int d, double alpha, double beta) {
    require_radial_exponent(alpha, d, "alpha");
    require_radial_exponent(beta, d, "beta");
    return Weight(d, RadialPowerW{alpha, beta});
  }

  static Weight partial_radial_power(int n, int k, double alpha, double beta) {
    if (n < 1 || k < 0) throw InvalidSpec("Weight: partial radial needs n >= 1, k >= 0");
    require_radial_exponent(alpha, n, "alpha");
    require_radial_exponent(beta, n, "beta");
    return Weight(n + k, PartialRadialPowerW{n, k, alpha, beta});
  }

  static Weight product_power(std::vector<int> dims, std::vector<double> alphas) {
    if (dims.empty() || dims.size() != alphas.size())
      throw InvalidSpec("Weight: product power needs matching non-empty dims/alphas");
    int d = 0;
    for (std::size_t j = 0; j < dims.size(); ++j) {
      if (dims[j] < 1) throw InvalidSpec("Weight: product power blocks must have d_j >= 1");
      require_radial_exponent(alphas[j], dims[j], "alpha_j");
      d += dims[j];
    }
    return Weight(d, ProductPowerW{std::move(dims), std::move(alphas)});
  }

  static Weight distance_power(int d, Manifold manifold, double gamma) {
    if (static_cast<int>(manifold.center.size()) != d)
      throw InvalidSpec("Weight: manifold dimension mismatch");
    if (manifold.shape == Manifold::Shape::Circle3d && d != 3)
      throw InvalidSpec("Weight: circle3d requires d = 3");
    int k = manifold.codim(d);
    if (k < 1 || k > d - 1) throw InvalidSpec("Weight: manifold codimension out of range");
    if (gamma <= -k) throw InvalidSpec("Weight: gamma must exceed -codim for local integrability");
    return Weight(d, DistancePowerW{std::move(manifold), gamma});
  }

  static Weight custom(int d, std::function<double(std::span<const double>)> eval,
                       quad::SingularSet singular = {}, std::string label = "custom") {
    if (!eval) throw InvalidSpec("Weight: custom evaluator required");
    return Weight(d, CustomW{std::move(eval), std::move(singular), std::move(label)});
  }

  int dim() const { return d_; }
  Family family() const { return static_cast<Family>(fam_.index()); }
  const Variant& spec() const { return fam_; }
  double scale() const { return scale_; }

  template <typename T>
  const T& as() const {
    return std::get<T>(fam_);
  }

  // Positive multiple c * w (verdicts must be invariant under this).
  Weight scaled(double c) const {
    if (c <= 0) throw InvalidSpec("Weight: scale must be positive");
    Weight w = *this;
    w.scale_ *= c;
    w.key_.clear();
    return w;
  }

  // w^e within the catalog when possible. Throws InvalidSpec when the result
  // would not be locally integrable (callers translate to NonIntegrableDual).
  Weight pow(double e) const;

  const std::string& key() const {
    if (key_.empty()) key_ = make_key();
    return key_;
  }

  // Pointwise evaluation; throws SingularPoint on the singular locus when the
  // local exponent is negative.
  double operator()(std::span<const double> x) const;

  // True where pointwise evaluation is a poor cell representative (zeros or
  // blow-ups of a power factor); grid norms switch to cell averages there.
  bool on_singular_locus(std::span<const double> x, double tol) const;

  quad::SingularSet singular_structure() const;

  // Representative points of the singular/degenerate locus (used to anchor
  // A_p cube families and embedding probe positions).
  std::vector<std::vector<double>> singular_anchors() const;

 private:
  Weight(int d, Variant v) : d_(d), fam_(std::move(v)) {
    if (d_ < 1) throw InvalidSpec("Weight: dimension must be >= 1");
  }

  static void require_radial_exponent(double a, int dloc, const char* name) {
    if (!(a > -static_cast<double>(dloc)))
      throw InvalidSpec(std::string("Weight: ") + name + " must exceed -d for local integrability");
  }

  std::string make_key() const;

  int d_;
  Variant fam_;
  double scale_ = 1.0;

  mutable std::string key_;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline double norm2(std::span<const double> x, std::size_t lo, std::size_t n) {
  // Scale by the largest component so squaring cannot underflow to zero for
  // tiny nonzero points (graded quadrature nodes reach |x| ~ 1e-240).
  double m = 0.0;
  for (std::size_t i = lo; i < lo + n; ++i) m = std::max(m, std::abs(x[i]));
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = lo; i < lo + n; ++i) {
    double t = x[i] / m;
    s += t * t;
  }
  return m * std::sqrt(s);
}

inline double power_factor(double r, double expo) {
  if (r == 0.0) {
    if (expo < 0.0) throw SingularPoint("weight evaluated at a singular point");
    return expo == 0.0 ? 1.0 : 0.0;
  }
  return std::pow(r, expo);
}

inline double radial_value(double r, double alpha, double beta) {
  return r <= 1.0 ? power_factor(r, alpha) : std::pow(r, beta);
}

}  // namespace detail

inline double Weight::operator()(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != d_) throw InvalidSpec("Weight: point dimension mismatch");
  double v = scale_;
  switch (family()) {
    case Family::Constant:
      v *= as<ConstantW>().c;
      break;
    case Family::RadialPower: {
      const auto& w = as<RadialPowerW>();
      v *= detail::radial_value(detail::norm2(x, 0, x.size()), w.alpha, w.beta);
      break;
    }
    case Family::PartialRadialPower: {
      const auto& w = as<PartialRadialPowerW>();
      v *= detail::radial_value(detail::norm2(x, 0, static_cast<std::size_t>(w.n)), w.alpha, w.beta);
      break;
    }
    case Family::ProductPower: {
      const auto& w = as<ProductPowerW>();
      std::size_t off = 0;
      for (std::size_t j = 0; j < w.dims.size(); ++j) {
        v *= detail::power_factor(detail::norm2(x, off, static_cast<std::size_t>(w.dims[j])), w.alphas[j]);
        off += static_cast<std::size_t>(w.dims[j]);
      }
      break;
    }
    case Family::DistancePower: {
      const auto& w = as<DistancePowerW>();
      v *= detail::power_factor(w.manifold.distance(x), w.gamma);
      break;
    }
    case Family::Custom:
      v *= as<CustomW>().eval(x);
      break;
  }
  return v;
}

inline bool Weight::on_singular_locus(std::span<const double> x, double tol) const {
  switch (family()) {
    case Family::Constant:
      return false;
    case Family::RadialPower: {
      const auto& w = as<RadialPowerW>();
      return w.alpha != 0.0 && detail::norm2(x, 0, x.size()) <= tol;
    }
    case Family::PartialRadialPower: {
      const auto& w = as<PartialRadialPowerW>();
      return w.alpha != 0.0 && detail::norm2(x, 0, static_cast<std::size_t>(w.n)) <= tol;
    }
    case Family::ProductPower: {
      const auto& w = as<ProductPowerW>();
      std::size_t off = 0;
      for (std::size_t j = 0; j < w.dims.size(); ++j) {
        if (w.alphas[j] != 0.0 &&
            detail::norm2(x, off, static_cast<std::size_t>(w.dims[j])) <= tol)
          return true;
        off += static_cast<std::size_t>(w.dims[j]);
      }
      return false;
    }
    case Family::DistancePower: {
      const auto& w = as<DistancePowerW>();
      return w.gamma != 0.0 && w.manifold.distance(x) <= tol;
    }
    case Family::Custom: {
      const auto& s = as<CustomW>().singular;
      for (const auto& pt : s.points) {
        double r2 = 0.0;
        for (std::size_t i = 0; i < pt.size(); ++i) {
          double dx = x[i] - pt[i];
          r2 += dx * dx;
        }
        if (std::sqrt(r2) <= tol) return true;
      }
      for (const auto& hp : s.hyperplanes)
        if (std::abs(x[static_cast<std::size_t>(hp.axis)] - hp.offset) <= tol) return true;
      for (const auto& sp : s.spheres) {
        double r2 = 0.0;
        for (std::size_t i = 0; i < sp.center.size(); ++i) {
          double dx = x[i] - sp.center[i];
          r2 += dx * dx;
        }
        if (std::abs(std::sqrt(r2) - sp.radius) <= tol) return true;
      }
      return false;
    }
  }
  return false;
}

inline quad::SingularSet Weight::singular_structure() const {
  quad::SingularSet s;
  auto origin = [&](int n) {
    std::vector<double> z(static_cast<std::size_t>(d_), 0.0);
    (void)n;
    return z;
  };
  switch (family()) {
    case Family::Constant:
      break;
    case Family::RadialPower: {
      const auto& w = as<RadialPowerW>();
      s.points.push_back(origin(d_));
      if (w.alpha != w.beta)
        s.spheres.push_back({std::vector<double>(static_cast<std::size_t>(d_), 0.0), 1.0});
      break;
    }
    case Family::PartialRadialPower: {
      const auto& w = as<PartialRadialPowerW>();
      for (int i = 0; i < w.n; ++i) s.hyperplanes.push_back({i, 0.0});
      break;
    }
    case Family::ProductPower: {
      const auto& w = as<ProductPowerW>();
      int off = 0;
      for (std::size_t j = 0; j < w.dims.size(); ++j) {
        for (int i = 0; i < w.dims[j]; ++i) s.hyperplanes.push_back({off + i, 0.0});
        off += w.dims[j];
      }
      break;
    }
    case Family::DistancePower: {
      const auto& w = as<DistancePowerW>();
      s.spheres.push_back({w.manifold.center, w.manifold.radius});
      if (w.manifold.shape == Manifold::Shape::Circle3d) {
        // The circle is sphere-cap carried in the plane; declaring the plane
        // too makes the bisection grade toward their intersection.
        int axis = -1;
        for (int i = 0; i < 3; ++i)
          if (std::abs(std::abs(w.manifold.normal[static_cast<std::size_t>(i)]) - 1.0) < 1e-12) axis = i;
        if (axis >= 0) s.hyperplanes.push_back({axis, w.manifold.center[static_cast<std::size_t>(axis)]});
      }
      break;
    }
    case Family::Custom:
      s = as<CustomW>().singular;
      break;
  }
  return s;
}

inline std::vector<std::vector<double>> Weight::singular_anchors() const {
  std::vector<std::vector<double>> out;
  std::vector<double> z(static_cast<std::size_t>(d_), 0.0);
  switch (family()) {
    case Family::Constant:
    case Family::RadialPower:
    case Family::PartialRadialPower:
    case Family::ProductPower:
      out.push_back(z);
      break;
    case Family::DistancePower: {
      const auto& m = as<DistancePowerW>().manifold;
      std::vector<double> a = m.center;
      if (m.shape == Manifold::Shape::Sphere) {
        a[0] += m.radius;
      } else {
        // First in-plane direction.
        std::vector<double> e = {1.0, 0.0, 0.0};
        double dot = e[0] * m.normal[0];
        if (std::abs(dot) > 0.9) {
          e = {0.0, 1.0, 0.0};
          dot = e[1] * m.normal[1];
        }
        double nrm = 0.0;
        for (int i = 0; i < 3; ++i) {
          e[static_cast<std::size_t>(i)] -= dot * m.normal[static_cast<std::size_t>(i)];
          nrm += e[static_cast<std::size_t>(i)] * e[static_cast<std::size_t>(i)];
        }
        nrm = std::sqrt(nrm);
        for (int i = 0; i < 3; ++i)
          a[static_cast<std::size_t>(i)] += m.radius * e[static_cast<std::size_t>(i)] / nrm;
      }
      out.push_back(std::move(a));
      break;
    }
    case Family::Custom: {
      const auto& s = as<CustomW>().singular;
      for (const auto& pt : s.points) out.push_back(pt);
      for (const auto& sp : s.spheres) {
        std::vector<double> a = sp.center;
        a[0] += sp.radius;
        out.push_back(std::move(a));
      }
      if (out.empty() && !s.hyperplanes.empty()) {
        std::vector<double> a = z;
        for (const auto& hp : s.hyperplanes) a[static_cast<std::size_t>(hp.axis)] = hp.offset;
        out.push_back(std::move(a));
      }
      if (out.empty()) out.push_back(z);
      break;
    }
  }
  return out;
}

inline std::string Weight::make_key() const {
  std::ostringstream os;
  os.precision(12);
  switch (family()) {
    case Family::Constant:
      os << "constant[d=" << d_ << ",c=" << as<ConstantW>().c << "]";
      break;
    case Family::RadialPower: {
      const auto& w = as<RadialPowerW>();
      os << "radial_power[d=" << d_ << ",alpha=" << w.alpha << ",beta=" << w.beta << "]";
      break;
    }
    case Family::PartialRadialPower: {
      const auto& w = as<PartialRadialPowerW>();
      os << "partial_radial_power[n=" << w.n << ",k=" << w.k << ",alpha=" << w.alpha
         << ",beta=" << w.beta << "]";
      break;
    }
    case Family::ProductPower: {
      const auto& w = as<ProductPowerW>();
      os << "product_power[dims=(" << join(w.dims) << "),alphas=(" << join(w.alphas) << ")]";
      break;
    }
    case Family::DistancePower: {
      const auto& w = as<DistancePowerW>();
      os << "distance_power[d=" << d_
         << ",shape=" << (w.manifold.shape == Manifold::Shape::Sphere ? "sphere" : "circle3d")
         << ",center=(" << join(w.manifold.center) << "),r=" << w.manifold.radius
         << ",gamma=" << w.gamma << "]";
      break;
    }
    case Family::Custom: {
      os << "custom[d=" << d_ << "," << as<CustomW>().label << "@" << static_cast<const void*>(this)
         << "]";
      break;
    }
  }
  if (scale_ != 1.0) os << "*" << scale_;
  return os.str();
}

inline Weight Weight::pow(double e) const {
  switch (family()) {
    case Family::Constant:
      return constant(d_, std::pow(scale_ * as<ConstantW>().c, e));
    case Family::RadialPower: {
      const auto& w = as<RadialPowerW>();
      Weight r = radial_power(d_, w.alpha * e, w.beta * e);
      r.scale_ = std::pow(scale_, e);
      return r;
    }
    case Family::PartialRadialPower: {
      const auto& w = as<PartialRadialPowerW>();
      Weight r = partial_radial_power(w.n, w.k, w.alpha * e, w.beta * e);
      r.scale_ = std::pow(scale_, e);
      return r;
    }
    case Family::ProductPower: {
      const auto& w = as<ProductPowerW>();
      std::vector<double> a = w.alphas;
      for (auto& v : a) v *= e;
      Weight r = product_power(w.dims, std::move(a));
      r.scale_ = std::pow(scale_, e);
      return r;
    }
    case Family::DistancePower: {
      const auto& w = as<DistancePowerW>();
      Weight r = distance_power(d_, w.manifold, w.gamma * e);
      r.scale_ = std::pow(scale_, e);
      return r;
    }
    case Family::Custom: {
      const auto& w = as<CustomW>();
      auto base = w.eval;
      double sc = scale_;
      Weight r = custom(
          d_,
          [base, sc, e](std::span<const double> x) { return std::pow(sc * base(x), e); },
          w.singular, w.label + "^" + std::to_string(e));
      return r;
    }
  }
  throw InvalidSpec("Weight::pow: unreachable");
}

// w0^{e0} * w1^{e1}, staying inside one catalog family when the geometries
// match; otherwise a Custom weight with merged singular structure.
inline Weight power_product(const Weight& w0, double e0, const Weight& w1, double e1) {
  if (w0.dim() != w1.dim()) throw InvalidSpec("power_product: dimension mismatch");
  const int d = w0.dim();

  auto scale_of = [](const Weight& w, double e) { return std::pow(w.scale(), e); };

  if (w0.family() == Family::Constant) {
    double c = std::pow(w0.scale() * w0.as<ConstantW>().c, e0);
    return w1.pow(e1).scaled(c);
  }
  if (w1.family() == Family::Constant) {
    double c = std::pow(w1.scale() * w1.as<ConstantW>().c, e1);
    return w0.pow(e0).scaled(c);
  }

  if (w0.family() == Family::RadialPower && w1.family() == Family::RadialPower) {
    const auto& a = w0.as<RadialPowerW>();
    const auto& b = w1.as<RadialPowerW>();
    return Weight::radial_power(d, a.alpha * e0 + b.alpha * e1, a.beta * e0 + b.beta * e1)
        .scaled(scale_of(w0, e0) * scale_of(w1, e1));
  }
  if (w0.family() == Family::PartialRadialPower && w1.family() == Family::PartialRadialPower) {
    const auto& a = w0.as<PartialRadialPowerW>();
    const auto& b = w1.as<PartialRadialPowerW>();
    if (a.n == b.n && a.k == b.k)
      return Weight::partial_radial_power(a.n, a.k, a.alpha * e0 + b.alpha * e1,
                                          a.beta * e0 + b.beta * e1)
          .scaled(scale_of(w0, e0) * scale_of(w1, e1));
  }
  if (w0.family() == Family::ProductPower && w1.family() == Family::ProductPower) {
    const auto& a = w0.as<ProductPowerW>();
    const auto& b = w1.as<ProductPowerW>();
    if (a.dims == b.dims) {
      std::vector<double> al(a.alphas.size());
      for (std::size_t j = 0; j < al.size(); ++j) al[j] = a.alphas[j] * e0 + b.alphas[j] * e1;
      return Weight::product_power(a.dims, std::move(al))
          .scaled(scale_of(w0, e0) * scale_of(w1, e1));
    }
  }
  if (w0.family() == Family::DistancePower && w1.family() == Family::DistancePower) {
    const auto& a = w0.as<DistancePowerW>();
    const auto& b = w1.as<DistancePowerW>();
    if (a.manifold.same_geometry(b.manifold))
      return Weight::distance_power(d, a.manifold, a.gamma * e0 + b.gamma * e1)
          .scaled(scale_of(w0, e0) * scale_of(w1, e1));
  }

  // Fallback: custom product with merged singular structure.
  Weight c0 = w0, c1 = w1;
  auto eval = [c0, c1, e0, e1](std::span<const double> x) {
    return std::pow(c0(x), e0) * std::pow(c1(x), e1);
  };
  return Weight::custom(d, eval, w0.singular_structure().merged_with(w1.singular_structure()),
                        w0.key() + "^" + std::to_string(e0) + "*" + w1.key() + "^" + std::to_string(e1));
}

inline double eval_weight(const Weight& w, std::span<const double> x) { return w(x); }

// ---------------------------------------------------------------------------
// Cube measures
// ---------------------------------------------------------------------------

enum class MeasurePath { ClosedForm, SemiAnalytic, Quadrature };

struct MeasureResult {
  double value = 0.0;
  double error = 0.0;
  MeasurePath path = MeasurePath::ClosedForm;
};

namespace detail {

// Antiderivative of t^{g} on t >= 0 (g > -1): t^{g+1}/(g+1).
inline double pure_primitive(double t, double g) { return std::pow(t, g + 1.0) / (g + 1.0); }

// int over [a, b] of |t|^g dt, g > -1, exact.
inline double pure_power_interval(double g, double a, double b) {
  auto F = [g](double t) { return pure_primitive(t, g); };
  if (a >= 0.0) return F(b) - F(a);
  if (b <= 0.0) return F(-a) - F(-b);
  return F(-a) + F(b);
}

// Antiderivative of w_{alpha,beta}(t) on t >= 0.
inline double radial_primitive_1d(double t, double alpha, double beta) {
  if (t <= 1.0) return pure_primitive(t, alpha);
  return 1.0 / (alpha + 1.0) + (std::pow(t, beta + 1.0) - 1.0) / (beta + 1.0);
}

inline double radial_interval_1d(double alpha, double beta, double a, double b) {
  auto F = [&](double t) { return radial_primitive_1d(t, alpha, beta); };
  if (a >= 0.0) return F(b) - F(a);
  if (b <= 0.0) return F(-a) - F(-b);
  return F(-a) + F(b);
}

// Radial antiderivative G(R) = int_0^R g(rho) rho^{d-1} drho for the 2D paths.
struct RadialProfile2d {
  // g(rho) = rho^alpha for rho <= s, rho^beta beyond (s = regime switch), or
  // |rho - r|^gamma around a sphere of radius r.
  enum class Kind { Power, SphereDistance } kind = Kind::Power;
  double alpha = 0.0, beta = 0.0;  // Power
  double radius = 1.0;             // SphereDistance
  double gamma = 0.0;

  double primitive(double R) const {
    if (kind == Kind::Power) {
      if (R <= 1.0) return std::pow(R, alpha + 2.0) / (alpha + 2.0);
      return 1.0 / (alpha + 2.0) + (std::pow(R, beta + 2.0) - 1.0) / (beta + 2.0);
    }
    // int_0^R |rho - r|^gamma rho drho via u = rho - r:
    // r * A1(u) + A2(u), A1 = sgn(u)|u|^{g+1}/(g+1), A2 = |u|^{g+2}/(g+2).
    auto A1 = [this](double u) {
      double a = std::pow(std::abs(u), gamma + 1.0) / (gamma + 1.0);
      return u >= 0 ? a : -a;
    };
    auto A2 = [this](double u) { return std::pow(std::abs(u), gamma + 2.0) / (gamma + 2.0); };
    double r = radius;
    return r * (A1(R - r) - A1(-r)) + (A2(R - r) - A2(-r));
  }

  double switch_radius() const {
    if (kind == Kind::Power) return alpha == beta ? 0.0 : 1.0;
    return radius;
  }
};

// Adaptive 1D Gauss-Legendre (for the angular integrals; analytic between
// breakpoints so this converges spectrally).
inline double integrate_1d(const std::function<double(double)>& f, double a, double b, double tol,
                           int depth = 0) {
  const auto& rule = quad::gl16();
  auto gl = [&](double lo, double hi) {
    double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    double s = 0.0;
    for (int i = 0; i < 16; ++i)
      s += rule.weights[static_cast<std::size_t>(i)] * f(c + h * rule.nodes[static_cast<std::size_t>(i)]);
    return s * h;
  };
  double whole = gl(a, b);
  double mid = 0.5 * (a + b);
  double split = gl(a, mid) + gl(mid, b);
  if (std::abs(split - whole) <= tol * std::max(1e-300, std::abs(split)) || depth >= 28)
    return split;
  return integrate_1d(f, a, mid, tol, depth + 1) + integrate_1d(f, mid, b, tol, depth + 1);
}

// Exact-grade measure of a radially symmetric profile over a 2D rectangle:
// split into quadrant pieces, convert to polar, integrate the closed-form
// radial primitive over the angle with analytic breakpoints.
inline double radial_measure_2d(const RadialProfile2d& prof, double cx, double cy, const Box& box,
                                double tol) {
  // Shift so the symmetry center is the origin.
  double x0 = box.lo[0] - cx, x1 = box.hi[0] - cx;
  double y0 = box.lo[1] - cy, y1 = box.hi[1] - cy;

  double total = 0.0;
  // Quadrant pieces: reflect everything into the closed first quadrant.
  struct Piece {
    double a1, b1, a2, b2;
  };
  std::vector<Piece> pieces;
  auto add_piece = [&](double ax, double bx, double ay, double by) {
    // Interval [ax,bx] lies entirely on one side of 0 after splitting.
    double a1 = std::min(std::abs(ax), std::abs(bx));
    double b1 = std::max(std::abs(ax), std::abs(bx));
    double a2 = std::min(std::abs(ay), std::abs(by));
    double b2 = std::max(std::abs(ay), std::abs(by));
    if (b1 - a1 <= 0 || b2 - a2 <= 0) return;
    pieces.push_back({a1, b1, a2, b2});
  };
  std::vector<std::pair<double, double>> xs, ys;
  if (x0 < 0 && x1 > 0) {
    xs = {{x0, 0.0}, {0.0, x1}};
  } else {
    xs = {{x0, x1}};
  }
  if (y0 < 0 && y1 > 0) {
    ys = {{y0, 0.0}, {0.0, y1}};
  } else {
    ys = {{y0, y1}};
  }
  for (auto& ix : xs)
    for (auto& iy : ys) add_piece(ix.first, ix.second, iy.first, iy.second);

  const double big = 1e300;
  for (const auto& pc : pieces) {
    double a1 = pc.a1, b1 = pc.b1, a2 = pc.a2, b2 = pc.b2;
    double theta_min = std::atan2(a2, b1);
    double theta_max = std::atan2(b2, a1);
    if (theta_max <= theta_min) continue;

    auto R_enter = [&](double th) {
      double c = std::cos(th), s = std::sin(th);
      double r = 0.0;
      if (a1 > 0) r = std::max(r, c > 0 ? a1 / c : big);
      if (a2 > 0) r = std::max(r, s > 0 ? a2 / s : big);
      return r;
    };
    auto R_exit = [&](double th) {
      double c = std::cos(th), s = std::sin(th);
      double r = big;
      if (c > 0) r = std::min(r, b1 / c);
      if (s > 0) r = std::min(r, b2 / s);
      return r;
    };

    std::vector<double> brk = {theta_min, theta_max};
    auto add_brk = [&](double th) {
      if (std::isfinite(th) && th > theta_min + 1e-15 && th < theta_max - 1e-15) brk.push_back(th);
    };
    // Corner angles (active-constraint switches).
    add_brk(std::atan2(a2, a1));
    add_brk(std::atan2(b2, b1));
    add_brk(std::atan2(b2, a1));
    add_brk(std::atan2(a2, b1));
    // Regime-switch crossings R_i(theta) = s.
    double sw = prof.switch_radius();
    if (sw > 0) {
      for (double c : {a1, b1})
        if (c > 0 && c < sw) add_brk(std::acos(c / sw));
      for (double c : {a2, b2})
        if (c > 0 && c < sw) add_brk(std::asin(c / sw));
    }
    std::sort(brk.begin(), brk.end());
    brk.erase(std::unique(brk.begin(), brk.end(),
                          [](double u, double v) { return std::abs(u - v) < 1e-14; }),
              brk.end());

    auto g = [&](double th) {
      double r0 = R_enter(th), r1 = R_exit(th);
      if (r1 <= r0) return 0.0;
      return prof.primitive(r1) - prof.primitive(r0);
    };
    for (std::size_t i = 0; i + 1 < brk.size(); ++i)
      total += integrate_1d(g, brk[i], brk[i + 1], tol);
  }
  return total;
}

// Pure power |x|^g over a box in dloc dimensions (no regime switch).
inline MeasureResult pure_power_measure(double g, const Box& box, const quad::Options& opt) {
  int dloc = box.dim();
  if (dloc == 1) return {pure_power_interval(g, box.lo[0], box.hi[0]), 0.0, MeasurePath::ClosedForm};
  if (dloc == 2) {
    RadialProfile2d prof;
    prof.kind = RadialProfile2d::Kind::Power;
    prof.alpha = g;
    prof.beta = g;
    double v = radial_measure_2d(prof, 0.0, 0.0, box, 1e-13);
    return {v, std::abs(v) * 1e-12, MeasurePath::SemiAnalytic};
  }
  quad::SingularSet s;
  s.points.push_back(std::vector<double>(static_cast<std::size_t>(dloc), 0.0));
  auto f = [g](std::span<const double> x) {
    double r2 = 0.0;
    for (double xi : x) r2 += xi * xi;
    return std::pow(std::sqrt(r2), g);
  };
  auto res = quad::integrate_box(f, box, s, opt);
  if (!res.converged)
    throw QuadratureFailure("pure power measure did not converge", res.divergent, res.value, res.error);
  return {res.value, res.error, MeasurePath::Quadrature};
}

// Quadrature integrand wrapper: evaluation exactly on the singular locus
// (possible when graded nodes cluster below one ulp of a nonzero anchor)
// reads as +inf, which the quadrature node filter then skips.
inline double guarded_eval(const Weight& w, std::span<const double> x) {
  try {
    return w(x);
  } catch (const SingularPoint&) {
    return kInf;
  }
}

inline Box sub_box(const Box& box, int lo_axis, int n) {
  std::vector<double> lo(box.lo.begin() + lo_axis, box.lo.begin() + lo_axis + n);
  std::vector<double> hi(box.hi.begin() + lo_axis, box.hi.begin() + lo_axis + n);
  return Box(std::move(lo), std::move(hi));
}

inline MeasureResult radial_measure(double alpha, double beta, const Box& box,
                                    const quad::Options& opt) {
  int dloc = box.dim();
  if (alpha == beta) return pure_power_measure(alpha, box, opt);
  if (dloc == 1)
    return {radial_interval_1d(alpha, beta, box.lo[0], box.hi[0]), 0.0, MeasurePath::ClosedForm};
  if (dloc == 2) {
    RadialProfile2d prof;
    prof.kind = RadialProfile2d::Kind::Power;
    prof.alpha = alpha;
    prof.beta = beta;
    double v = radial_measure_2d(prof, 0.0, 0.0, box, 1e-13);
    return {v, std::abs(v) * 1e-12, MeasurePath::SemiAnalytic};
  }
  quad::SingularSet s;
  s.points.push_back(std::vector<double>(static_cast<std::size_t>(dloc), 0.0));
  s.spheres.push_back({std::vector<double>(static_cast<std::size_t>(dloc), 0.0), 1.0});
  auto f = [alpha, beta](std::span<const double> x) {
    double r2 = 0.0;
    for (double xi : x) r2 += xi * xi;
    return radial_value(std::sqrt(r2), alpha, beta);
  };
  auto res = quad::integrate_box(f, box, s, opt);
  if (!res.converged)
    throw QuadratureFailure("radial measure did not converge", res.divergent, res.value, res.error);
  return {res.value, res.error, MeasurePath::Quadrature};
}

}  // namespace detail

inline MeasureResult cube_measure(const Weight& w, const Box& box, const quad::Options& opt = {});

namespace detail {

inline MeasureResult measure_dispatch(const Weight& w, const Box& box, const quad::Options& opt) {
  switch (w.family()) {
    case Family::Constant:
      return {w.as<ConstantW>().c * box.volume(), 0.0, MeasurePath::ClosedForm};
    case Family::RadialPower: {
      const auto& f = w.as<RadialPowerW>();
      return radial_measure(f.alpha, f.beta, box, opt);
    }
    case Family::PartialRadialPower: {
      const auto& f = w.as<PartialRadialPowerW>();
      Box bx = sub_box(box, 0, f.n);
      MeasureResult inner = radial_measure(f.alpha, f.beta, bx, opt);
      double volk = 1.0;
      for (int i = f.n; i < f.n + f.k; ++i) volk *= box.side(i);
      return {inner.value * volk, inner.error * volk, inner.path};
    }
    case Family::ProductPower: {
      const auto& f = w.as<ProductPowerW>();
      double v = 1.0, rel_err = 0.0;
      MeasurePath path = MeasurePath::ClosedForm;
      int off = 0;
      for (std::size_t j = 0; j < f.dims.size(); ++j) {
        Box bx = sub_box(box, off, f.dims[j]);
        MeasureResult mj = pure_power_measure(f.alphas[j], bx, opt);
        v *= mj.value;
        if (mj.value != 0.0) rel_err += mj.error / std::abs(mj.value);
        if (static_cast<int>(mj.path) > static_cast<int>(path)) path = mj.path;
        off += f.dims[j];
      }
      return {v, std::abs(v) * rel_err, path};
    }
    case Family::DistancePower: {
      const auto& f = w.as<DistancePowerW>();
      if (w.dim() == 2 && f.manifold.shape == Manifold::Shape::Sphere) {
        RadialProfile2d prof;
        prof.kind = RadialProfile2d::Kind::SphereDistance;
        prof.radius = f.manifold.radius;
        prof.gamma = f.gamma;
        double v = radial_measure_2d(prof, f.manifold.center[0], f.manifold.center[1], box, 1e-13);
        return {v, std::abs(v) * 1e-12, MeasurePath::SemiAnalytic};
      }
      Weight self = w;  // capture by value for the integrand
      auto fn = [self](std::span<const double> x) { return guarded_eval(self, x) / self.scale(); };
      auto res = quad::integrate_box(fn, box, w.singular_structure(), opt);
      if (!res.converged)
        throw QuadratureFailure("distance weight measure did not converge", res.divergent, res.value,
                                res.error);
      return {res.value, res.error, MeasurePath::Quadrature};
    }
    case Family::Custom: {
      Weight self = w;
      auto fn = [self](std::span<const double> x) { return guarded_eval(self, x) / self.scale(); };
      auto res = quad::integrate_box(fn, box, w.singular_structure(), opt);
      if (!res.converged)
        throw QuadratureFailure("custom weight measure did not converge", res.divergent, res.value,
                                res.error);
      return {res.value, res.error, MeasurePath::Quadrature};
    }
  }
  throw InvalidSpec("cube_measure: unreachable");
}

}  // namespace detail

// w(Q) over an axis-parallel box (dyadic cubes map to boxes via dyadic::cube_box).
inline MeasureResult cube_measure(const Weight& w, const Box& box, const quad::Options& opt) {
  if (box.dim() != w.dim()) throw InvalidSpec("cube_measure: box dimension mismatch");
  MeasureResult r = detail::measure_dispatch(w, box, opt);
  r.value *= w.scale();
  r.error *= w.scale();
  return r;
}

inline double cube_measure_value(const Weight& w, const Box& box, const quad::Options& opt = {}) {
  return cube_measure(w, box, opt).value;
}

// Forces the generic graded-quadrature path (cross-checks the exact and
// semi-analytic paths in tests).
inline MeasureResult cube_measure_generic(const Weight& w, const Box& box,
                                          const quad::Options& opt = {}) {
  Weight self = w;
  auto fn = [self](std::span<const double> x) { return detail::guarded_eval(self, x); };
  auto res = quad::integrate_box(fn, box, w.singular_structure(), opt);
  if (!res.converged)
    throw QuadratureFailure("generic measure did not converge", res.divergent, res.value, res.error);
  return {res.value, res.error, MeasurePath::Quadrature};
}

// ---------------------------------------------------------------------------
// Muckenhoupt A_p diagnostics
// ---------------------------------------------------------------------------

// (avg_Q w) * (avg_Q w^{-1/(p-1)})^{p-1}; >= 1 by Jensen.
inline double ap_quantity(const Weight& w, const Box& Q, double p, const quad::Options& opt = {}) {
  if (!(p > 1.0) || std::isinf(p)) throw InvalidSpec("ap_quantity: requires 1 < p < inf");
  double vol = Q.volume();
  if (vol <= 0.0) throw InvalidSpec("ap_quantity: degenerate cube");
  double m0 = cube_measure(w, Q, opt).value;
  const double dual_expo = -1.0 / (p - 1.0);
  Weight dual = [&]() -> Weight {
    try {
      return w.pow(dual_expo);
    } catch (const InvalidSpec&) {
      // The dual leaves the cataloged exponent range. Its integral over this
      // particular cube can still be finite (for instance when only the
      // growth regime of a two-regime power is out of range), so fall back
      // to direct quadrature; a genuinely non-integrable local singularity
      // surfaces below as a divergent integral.
      Weight base = w;
      return Weight::custom(
          w.dim(),
          [base, dual_expo](std::span<const double> x) {
            try {
              return std::pow(base(x), dual_expo);
            } catch (const SingularPoint&) {
              return 0.0;  // w blows up there and the dual exponent is negative
            }
          },
          w.singular_structure(), w.key() + "^{-1/(p-1)}");
    }
  }();
  double m1 = 0.0;
  try {
    m1 = cube_measure(dual, Q, opt).value;
  } catch (const QuadratureFailure& qf) {
    if (qf.divergent) throw NonIntegrableDual("dual weight integral diverges on the cube");
    throw;
  }
  return (m0 / vol) * std::pow(m1 / vol, p - 1.0);
}

enum class ApClass { Member, NonMember, Boundary, Unknown };

inline const char* to_string(ApClass c) {
  switch (c) {
    case ApClass::Member: return "member";
    case ApClass::NonMember: return "non_member";
    case ApClass::Boundary: return "boundary";
    case ApClass::Unknown: return "unknown";
  }
  return "unknown";
}

struct ApMembership {
  ApClass cls = ApClass::Unknown;
  bool inferred = false;  // PartialRadialPower rule extrapolated from n-dim radial
  double margin = kNaN;   // distance to the nearest range boundary
};

// Cataloged A_p ranges: power exponents must lie in (-d_loc, d_loc*(p-1))
// with d_loc the dimension carrying the power.
inline ApMembership ap_membership_closed_form(const Weight& w, double p, double band = 1e-9) {
  if (!(p > 1.0)) throw InvalidSpec("ap_membership_closed_form: requires p > 1");
  auto range_margin = [p](double expo, int dloc) {
    double lo = -static_cast<double>(dloc);
    double hi = static_cast<double>(dloc) * (p - 1.0);
    return std::min(expo - lo, hi - expo);
  };
  ApMembership out;
  double margin = kInf;
  switch (w.family()) {
    case Family::Constant:
      out.cls = ApClass::Member;
      out.margin = kInf;
      return out;
    case Family::RadialPower: {
      const auto& f = w.as<RadialPowerW>();
      margin = std::min(range_margin(f.alpha, w.dim()), range_margin(f.beta, w.dim()));
      break;
    }
    case Family::PartialRadialPower: {
      const auto& f = w.as<PartialRadialPowerW>();
      margin = std::min(range_margin(f.alpha, f.n), range_margin(f.beta, f.n));
      out.inferred = true;
      break;
    }
    case Family::ProductPower: {
      const auto& f = w.as<ProductPowerW>();
      for (std::size_t j = 0; j < f.dims.size(); ++j)
        margin = std::min(margin, range_margin(f.alphas[j], f.dims[j]));
      break;
    }
    case Family::DistancePower: {
      const auto& f = w.as<DistancePowerW>();
      int k = f.manifold.codim(w.dim());
      margin = std::min(f.gamma + k, k * (p - 1.0) - f.gamma);
      break;
    }
    case Family::Custom:
      out.cls = ApClass::Unknown;
      return out;
  }
  out.margin = margin;
  if (margin > band)
    out.cls = ApClass::Member;
  else if (margin < -band)
    out.cls = ApClass::NonMember;
  else
    out.cls = ApClass::Boundary;
  return out;
}

struct ApCubePolicy {
  int j_max = 10;          // smallest cubes have side 2^{-j_max}
  int j_min = -10;         // largest cubes have side 2^{-j_min}
  double off_offset = 2.5; // translate distance for off-singular cubes
  double slope_threshold = 0.02;
  quad::Options quad;
};

struct ApEstimate {
  double p = 2.0;
  double supremum = 1.0;
  Box argmax;
  double growth_slope = 0.0;  // the binding branch slope
  double slope_shrink = 0.0;  // log2 quantity per level, cubes shrinking onto the singular set
  double slope_grow = 0.0;    // log2 quantity per level, cubes growing to infinity
  ApClass classification = ApClass::Unknown;
  std::string note;
};

namespace detail {

inline Box centered_cube(std::span<const double> c, double side) {
  std::vector<double> lo(c.size()), hi(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    lo[i] = c[i] - 0.5 * side;
    hi[i] = c[i] + 0.5 * side;
  }
  return Box(std::move(lo), std::move(hi));
}

struct SimpleFit {
  double slope = 0.0;
  double residual = 0.0;
  int n = 0;
};

inline SimpleFit fit_pairs(const std::vector<std::pair<double, double>>& xy) {
  SimpleFit f;
  f.n = static_cast<int>(xy.size());
  if (f.n < 2) return f;
  double mx = 0, my = 0;
  for (auto& [x, y] : xy) {
    mx += x;
    my += y;
  }
  mx /= f.n;
  my /= f.n;
  double sxx = 0, sxy = 0;
  for (auto& [x, y] : xy) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx <= 0) return f;
  f.slope = sxy / sxx;
  double b = my - f.slope * mx;
  double rss = 0;
  for (auto& [x, y] : xy) {
    double e = y - (f.slope * x + b);
    rss += e * e;
  }
  f.residual = std::sqrt(rss / f.n);
  return f;
}

}  // namespace detail

// Structured cube-family probe of the A_p condition: centered families
// shrinking onto each singular anchor and growing toward infinity, plus
// off-singular translates. Classifies by fitted log2-slopes of the quantity.
inline ApEstimate estimate_ap_constant(const Weight& w, double p, const ApCubePolicy& policy = {}) {
  if (!(p > 1.0) || std::isinf(p)) throw InvalidSpec("estimate_ap_constant: requires 1 < p < inf");
  ApEstimate est;
  est.p = p;

  auto anchors = w.singular_anchors();
  std::vector<std::pair<double, double>> shrink_pts, grow_pts;
  bool dual_blowup = false;

  auto consider = [&](const Box& Q, double q) {
    if (q > est.supremum) {
      est.supremum = q;
      est.argmax = Q;
    }
  };

  try {
    for (const auto& a : anchors) {
      for (int j = policy.j_min; j <= policy.j_max; ++j) {
        double side = std::pow(2.0, -j);
        Box Q = detail::centered_cube(a, side);
        double q = ap_quantity(w, Q, p, policy.quad);
        consider(Q, q);
        if (j >= 2) shrink_pts.push_back({static_cast<double>(j), std::log2(q)});
        if (j <= -2) grow_pts.push_back({static_cast<double>(-j), std::log2(q)});
      }
      // Off-singular translates: the quantity must relax toward 1.
      std::vector<double> off(a.begin(), a.end());
      off[0] += policy.off_offset * std::max(1.0, std::abs(a[0]));
      for (int j = 0; j <= policy.j_max; ++j) {
        double side = std::pow(2.0, -j);
        Box Q = detail::centered_cube(off, side);
        consider(Q, ap_quantity(w, Q, p, policy.quad));
      }
    }
  } catch (const NonIntegrableDual& e) {
    dual_blowup = true;
    est.note = e.what();
  }

  auto fs = detail::fit_pairs(shrink_pts);
  auto fg = detail::fit_pairs(grow_pts);
  est.slope_shrink = fs.slope;
  est.slope_grow = fg.slope;
  est.growth_slope = std::abs(fs.slope) >= std::abs(fg.slope) ? fs.slope : fg.slope;

  if (dual_blowup) {
    est.classification = ApClass::NonMember;
    return est;
  }
  double thr = policy.slope_threshold;
  bool growing = fs.slope > thr || fg.slope > thr;
  bool flat = std::abs(fs.slope) <= thr && std::abs(fg.slope) <= thr;
  if (growing) {
    est.classification = ApClass::NonMember;
    est.note = "A_p quantity grows along the cube family";
  } else if (flat) {
    est.classification = ApClass::Member;
  } else {
    est.classification = ApClass::Boundary;
    est.note = "A_p quantity not stabilized across the cube family";
  }
  return est;
}

// ---------------------------------------------------------------------------
// Product-weight lemma checks
// ---------------------------------------------------------------------------

// For which (epsilon, delta) does w0^{-eps} w1^{1+delta} behave like an A_p
// weight? Empirical probe of product stability under small exponent
// perturbations: reports the estimated classification per sampled pair; no
// closed-form threshold is claimed.
struct ProductWeightCheck {
  double eps = 0.0, delta = 0.0;
  ApClass classification = ApClass::Unknown;
  double supremum = kNaN;
  std::string weight_key;
};

inline std::vector<ProductWeightCheck> check_product_weight_ap(
    const Weight& w0, const Weight& w1, double p, std::span<const double> eps_grid,
    std::span<const double> delta_grid, const ApCubePolicy& policy = {}) {
  std::vector<ProductWeightCheck> out;
  for (double eps : eps_grid)
    for (double delta : delta_grid) {
      ProductWeightCheck row;
      row.eps = eps;
      row.delta = delta;
      try {
        Weight v = power_product(w0, -eps, w1, 1.0 + delta);
        row.weight_key = v.key();
        ApEstimate est = estimate_ap_constant(v, p, policy);
        row.classification = est.classification;
        row.supremum = est.supremum;
      } catch (const InvalidSpec&) {
        row.classification = ApClass::NonMember;
        row.weight_key = "(not locally integrable)";
      } catch (const NonIntegrableDual&) {
        row.classification = ApClass::NonMember;
      }
      out.push_back(std::move(row));
    }
  return out;
}

// Reverse-Holder-type product bound: ratio of int_Q w0^{-eps} w1^{1+delta}
// against |Q|^{eps-delta} (int_Q w0)^{-eps} (int_Q w1)^{1+delta}, maximized
// over a cube family. A bounded max ratio is the empirical form of the
// product estimate behind the perturbation arguments.
struct ReverseHolderRow {
  Box cube;
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
};

struct ReverseHolderReport {
  double eps = 0.0, delta = 0.0;
  double max_ratio = 0.0;
  Box argmax;
  std::vector<ReverseHolderRow> rows;
};

inline ReverseHolderReport check_reverse_holder(const Weight& w0, const Weight& w1, double eps,
                                                double delta, std::span<const Box> cubes,
                                                const quad::Options& opt = {}) {
  if (eps < 0 || delta < 0) throw InvalidSpec("check_reverse_holder: eps, delta >= 0 required");
  ReverseHolderReport rep;
  rep.eps = eps;
  rep.delta = delta;
  Weight prod = power_product(w0, -eps, w1, 1.0 + delta);
  for (const auto& Q : cubes) {
    ReverseHolderRow row;
    row.cube = Q;
    row.lhs = cube_measure(prod, Q, opt).value;
    double m0 = cube_measure(w0, Q, opt).value;
    double m1 = cube_measure(w1, Q, opt).value;
    row.rhs = std::pow(Q.volume(), eps - delta) * std::pow(m0, -eps) * std::pow(m1, 1.0 + delta);
    row.ratio = row.lhs / row.rhs;
    if (row.ratio > rep.max_ratio) {
      rep.max_ratio = row.ratio;
      rep.argmax = Q;
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

// Default cube family for the reverse-Holder probe: dyadic sides around each
// singular anchor plus unit translates.
inline std::vector<Box> default_reverse_holder_cubes(const Weight& w, int j_lo = -3, int j_hi = 8) {
  std::vector<Box> cubes;
  for (const auto& a : w.singular_anchors()) {
    for (int j = j_lo; j <= j_hi; ++j) cubes.push_back(detail::centered_cube(a, std::pow(2.0, -j)));
    std::vector<double> off(a.begin(), a.end());
    off[0] += 2.0;
    cubes.push_back(detail::centered_cube(off, 1.0));
  }
  return cubes;
}

}  // namespace embedkit::weights
