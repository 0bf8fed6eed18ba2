#include "equipart/geometry.hpp"

#include <cmath>

#include "equipart/error.hpp"

namespace equipart {

// ---------------------------------------------------------------------------
// Domain

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

const char* comparison_text(Comparison c) {
  switch (c) {
    case Comparison::Less: return "<";
    case Comparison::LessEqual: return "<=";
    case Comparison::Greater: return ">";
    case Comparison::GreaterEqual: return ">=";
  }
  return "?";
}

}  // namespace

Domain Domain::parse(std::string_view text, std::span<const std::string> vars,
                     const LetBindings& lets) {
  std::vector<Constraint> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t amp = text.find('&', start);
    if (amp == std::string_view::npos) amp = text.size();
    const std::string_view clause = text.substr(start, amp - start);
    const std::size_t op_pos = clause.find_first_of("<>");
    if (op_pos == std::string_view::npos) {
      throw ParseError("domain clause `" + trim(clause) + "` has no comparison", start,
                       {"'<'", "'<='", "'>'", "'>='"});
    }
    Constraint c;
    const bool with_eq = op_pos + 1 < clause.size() && clause[op_pos + 1] == '=';
    if (clause[op_pos] == '<') {
      c.op = with_eq ? Comparison::LessEqual : Comparison::Less;
    } else {
      c.op = with_eq ? Comparison::GreaterEqual : Comparison::Greater;
    }
    const std::size_t rhs_pos = op_pos + (with_eq ? 2 : 1);
    auto side = [&](std::size_t from, std::size_t len) {
      try {
        return equipart::parse(clause.substr(from, len), vars, lets);
      } catch (const ParseError& e) {
        throw ParseError("in domain clause: " + e.detail(), start + from + e.position(),
                         e.expected());
      }
    };
    c.lhs = side(0, op_pos);
    c.rhs = side(rhs_pos, std::string_view::npos);
    c.text = trim(clause);
    out.push_back(std::move(c));
    start = amp + 1;
  }
  return Domain(std::move(out));
}

bool Domain::contains(std::span<const double> point) const {
  for (const auto& c : constraints_) {
    double a = 0.0;
    double b = 0.0;
    try {
      a = evaluate(c.lhs, point);
      b = evaluate(c.rhs, point);
    } catch (const DomainError&) {
      return false;
    }
    bool ok = false;
    switch (c.op) {
      case Comparison::Less: ok = a < b; break;
      case Comparison::LessEqual: ok = a <= b; break;
      case Comparison::Greater: ok = a > b; break;
      case Comparison::GreaterEqual: ok = a >= b; break;
    }
    if (!ok) return false;
  }
  return true;
}

Domain Domain::intersect(const Domain& other) const {
  std::vector<Constraint> all = constraints_;
  all.insert(all.end(), other.constraints_.begin(), other.constraints_.end());
  return Domain(std::move(all));
}

std::string Domain::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < constraints_.size(); ++i) {
    if (i) s += " & ";
    const auto& c = constraints_[i];
    s += c.text.empty() ? equipart::to_string(c.lhs) + " " + comparison_text(c.op) + " " +
                              equipart::to_string(c.rhs)
                        : c.text;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Manifold

namespace {

using ExprMatrix = std::vector<Expression>;  // row-major

Expression det_expr(const ExprMatrix& a, std::size_t n) {
  if (n == 1) return a[0];
  if (n == 2) return a[0] * a[3] - a[1] * a[2];
  Expression det = Expression::constant(0.0);
  for (std::size_t col = 0; col < n; ++col) {
    if (a[col].is_constant(0.0)) continue;
    ExprMatrix minor;
    minor.reserve((n - 1) * (n - 1));
    for (std::size_t r = 1; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        if (c != col) minor.push_back(a[r * n + c]);
      }
    }
    const Expression term = a[col] * det_expr(minor, n - 1);
    det = (col % 2 == 0) ? det + term : det - term;
  }
  return det;
}

Expression cofactor(const ExprMatrix& a, std::size_t n, std::size_t row, std::size_t col) {
  if (n == 1) return Expression::constant(1.0);
  ExprMatrix minor;
  for (std::size_t r = 0; r < n; ++r) {
    if (r == row) continue;
    for (std::size_t c = 0; c < n; ++c) {
      if (c != col) minor.push_back(a[r * n + c]);
    }
  }
  const Expression m = det_expr(minor, n - 1);
  return ((row + col) % 2 == 0) ? m : -m;
}

}  // namespace

Manifold::Manifold(std::string name, std::vector<std::string> coords,
                   std::vector<std::vector<Expression>> rows, Domain domain, LetBindings lets)
    : name_(std::move(name)), coords_(std::move(coords)), lets_(std::move(lets)),
      domain_(std::move(domain)) {
  const std::size_t n = coords_.size();
  if (n < 1) throw GeometryError("manifold `" + name_ + "` has no coordinates");
  if (rows.size() != n) throw GeometryError("manifold `" + name_ + "`: metric has wrong row count");
  metric_.reserve(n * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw GeometryError("manifold `" + name_ + "`: metric row has wrong size");
    for (const auto& e : row) {
      if (variable_bound(e) > n) {
        throw GeometryError("manifold `" + name_ + "`: metric uses an unknown coordinate");
      }
      metric_.push_back(simplify(e));
    }
  }
  diagonal_ = true;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && !metric(i, j).is_constant(0.0)) diagonal_ = false;
      if (j > i && !structurally_equal(metric(i, j), metric(j, i))) {
        throw GeometryError("manifold `" + name_ + "`: metric is not symmetric (g_" +
                            std::to_string(i) + std::to_string(j) + " != g_" + std::to_string(j) +
                            std::to_string(i) + ")");
      }
    }
  }

  metric_deriv_.reserve(n * n * n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) metric_deriv_.push_back(differentiate(metric(i, j), k));
    }
  }

  inverse_.assign(n * n, Expression::constant(0.0));
  if (diagonal_) {
    det_ = metric(0, 0);
    for (std::size_t i = 1; i < n; ++i) det_ = det_ * metric(i, i);
    for (std::size_t i = 0; i < n; ++i) inverse_[i * n + i] = Expression(1.0) / metric(i, i);
  } else {
    det_ = det_expr(metric_, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) inverse_[i * n + j] = cofactor(metric_, n, j, i) / det_;
    }
  }
  sqrt_det_ = sqrt(det_);

  std::vector<Expression> outputs = metric_;
  outputs.insert(outputs.end(), metric_deriv_.begin(), metric_deriv_.end());
  metric_program_ = Program(outputs);
}

void Manifold::evaluate_metric(std::span<const double> p, std::span<double> g,
                               std::span<double> dg) const {
  const std::size_t n = dim();
  std::vector<double> out(n * n + n * n * n);
  metric_program_.evaluate(p, out);
  std::copy(out.begin(), out.begin() + static_cast<long>(n * n), g.begin());
  if (!dg.empty()) std::copy(out.begin() + static_cast<long>(n * n), out.end(), dg.begin());
}

ScalarField::ScalarField(ManifoldPtr m, Expression e, std::string n, Domain d)
    : manifold(std::move(m)), expr(std::move(e)), name(std::move(n)), domain(std::move(d)) {
  if (!manifold) throw GeometryError("scalar field without a manifold");
  if (variable_bound(expr) > manifold->dim()) {
    throw GeometryError("field `" + name + "` uses a coordinate outside manifold `" +
                        manifold->name() + "`");
  }
}

VectorField::VectorField(ManifoldPtr m, std::vector<Expression> c, std::string n)
    : manifold(std::move(m)), components(std::move(c)), name(std::move(n)) {
  if (!manifold) throw GeometryError("vector field without a manifold");
  if (components.size() != manifold->dim()) {
    throw GeometryError("vector field `" + name + "` has " + std::to_string(components.size()) +
                        " components on a " + std::to_string(manifold->dim()) +
                        "-dimensional manifold");
  }
  for (const auto& e : components) {
    if (variable_bound(e) > manifold->dim()) {
      throw GeometryError("vector field `" + name + "` uses a coordinate outside manifold `" +
                          manifold->name() + "`");
    }
  }
}

std::vector<double> VectorField::at(std::span<const double> p) const {
  std::vector<double> v(components.size());
  for (std::size_t i = 0; i < components.size(); ++i) v[i] = evaluate(components[i], p);
  return v;
}

// ---------------------------------------------------------------------------
// Pointwise metric quantities

MetricSample metric_at(const Manifold& m, std::span<const double> p) {
  const std::size_t n = m.dim();
  if (p.size() != n) throw GeometryError("metric_at: point has wrong dimension");
  if (!m.contains(p)) throw GeometryError("metric_at: point outside the domain of `" + m.name() + "`");
  std::vector<double> g(n * n);
  m.evaluate_metric(p, g, {});
  MetricSample ms;
  ms.g.resize(static_cast<long>(n), static_cast<long>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) ms.g(static_cast<long>(i), static_cast<long>(j)) = g[i * n + j];
  }
  for (std::size_t k = 1; k <= n; ++k) {
    const double minor = ms.g.topLeftCorner(static_cast<long>(k), static_cast<long>(k)).determinant();
    if (!(minor > 1e-12)) {
      throw GeometryError("metric of `" + m.name() + "` is not positive definite: leading minor " +
                          std::to_string(k) + " = " + std::to_string(minor));
    }
  }
  ms.det = ms.g.determinant();
  ms.inverse = ms.g.inverse();
  return ms;
}

Christoffel christoffel_from(const Manifold& m, std::span<const double> p, const MetricSample& ms) {
  const std::size_t n = m.dim();
  std::vector<double> g(n * n);
  std::vector<double> dg(n * n * n);
  m.evaluate_metric(p, g, dg);
  auto d = [&](std::size_t k, std::size_t i, std::size_t j) { return dg[(k * n + i) * n + j]; };
  Christoffel gamma(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < n; ++l) {
          s += ms.inverse(static_cast<long>(k), static_cast<long>(l)) *
               (d(i, j, l) + d(j, i, l) - d(l, i, j));
        }
        gamma(k, i, j) = 0.5 * s;
        gamma(k, j, i) = 0.5 * s;
      }
    }
  }
  return gamma;
}

Christoffel christoffel_at(const Manifold& m, std::span<const double> p) {
  return christoffel_from(m, p, metric_at(m, p));
}

double vector_norm(const MetricSample& ms, std::span<const double> v) {
  const Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<long>(v.size()));
  return std::sqrt(std::max(0.0, x.dot(ms.g * x)));
}

double covector_norm(const MetricSample& ms, std::span<const double> w) {
  const Eigen::Map<const Eigen::VectorXd> x(w.data(), static_cast<long>(w.size()));
  return std::sqrt(std::max(0.0, x.dot(ms.inverse * x)));
}

// ---------------------------------------------------------------------------
// FieldCalculus

FieldCalculus::FieldCalculus(const ScalarField& field) : field_(field) {
  const Manifold& m = manifold();
  const std::size_t n = m.dim();
  df_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) df_.push_back(differentiate(field_.expr, i));
  d2f_.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d2f_.push_back(j < i ? d2f_[j * n + i] : differentiate(df_[i], j));
    }
  }

  grad_norm_sq_ = Expression::constant(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      grad_norm_sq_ = grad_norm_sq_ + m.inverse_metric(i, j) * df_[i] * df_[j];
    }
  }

  Expression div = Expression::constant(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Expression flux = Expression::constant(0.0);
    for (std::size_t j = 0; j < n; ++j) flux = flux + m.inverse_metric(i, j) * df_[j];
    div = div + differentiate(m.sqrt_determinant() * flux, i);
  }
  laplacian_ = div / m.sqrt_determinant();

  std::vector<Expression> jet_out{field_.expr};
  jet_out.insert(jet_out.end(), df_.begin(), df_.end());
  jet_out.insert(jet_out.end(), d2f_.begin(), d2f_.end());
  jet_program_ = Program(jet_out);

  std::vector<Expression> triple_out{field_.expr, grad_norm_sq_, laplacian_};
  triple_out.insert(triple_out.end(), df_.begin(), df_.end());
  for (std::size_t i = 0; i < n; ++i) triple_out.push_back(differentiate(grad_norm_sq_, i));
  for (std::size_t i = 0; i < n; ++i) triple_out.push_back(differentiate(laplacian_, i));
  triple_program_ = Program(triple_out);
}

FieldCalculus::Jet FieldCalculus::jet(std::span<const double> p) const {
  const std::size_t n = manifold().dim();
  std::vector<double> out(1 + n + n * n);
  jet_program_.evaluate(p, out);
  Jet j;
  j.value = out[0];
  j.df.assign(out.begin() + 1, out.begin() + 1 + static_cast<long>(n));
  j.d2f.assign(out.begin() + 1 + static_cast<long>(n), out.end());
  return j;
}

FieldCalculus::Triple FieldCalculus::triple(std::span<const double> p) const {
  const std::size_t n = manifold().dim();
  std::vector<double> out(3 + 3 * n);
  triple_program_.evaluate(p, out);
  Triple t;
  t.f = out[0];
  t.grad_norm_sq = out[1];
  t.laplacian = out[2];
  auto slice = [&](std::size_t k) {
    return std::vector<double>(out.begin() + static_cast<long>(3 + k * n),
                               out.begin() + static_cast<long>(3 + (k + 1) * n));
  };
  t.df = slice(0);
  t.d_grad_norm_sq = slice(1);
  t.d_laplacian = slice(2);
  return t;
}

const Expression& FieldCalculus::normal_divergence() const {
  std::call_once(divergence_once_, [this] {
    const Manifold& m = manifold();
    const std::size_t n = m.dim();
    const Expression norm = sqrt(grad_norm_sq_);
    Expression div = Expression::constant(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      Expression nu = Expression::constant(0.0);
      for (std::size_t j = 0; j < n; ++j) nu = nu + m.inverse_metric(i, j) * df_[j];
      div = div + differentiate(m.sqrt_determinant() * (nu / norm), i);
    }
    divergence_ = div / m.sqrt_determinant();
    divergence_program_ = Program{divergence_};
  });
  return divergence_;
}

double FieldCalculus::evaluate_normal_divergence(std::span<const double> p) const {
  normal_divergence();
  double out = 0.0;
  divergence_program_.evaluate(p, std::span<double>(&out, 1));
  return out;
}

// ---------------------------------------------------------------------------
// Operators

namespace {

void require_inside(const ScalarField& f, std::span<const double> p) {
  if (p.size() != f.manifold->dim()) throw GeometryError("point has wrong dimension");
  if (!f.contains(p)) throw GeometryError("point outside the domain of field `" + f.name + "`");
}

std::vector<double> raise(const MetricSample& ms, std::span<const double> w) {
  const Eigen::Map<const Eigen::VectorXd> x(w.data(), static_cast<long>(w.size()));
  const Eigen::VectorXd r = ms.inverse * x;
  return {r.data(), r.data() + r.size()};
}

}  // namespace

std::vector<double> gradient(const FieldCalculus& f, std::span<const double> p) {
  require_inside(f.field(), p);
  const MetricSample ms = metric_at(f.manifold(), p);
  return raise(ms, f.jet(p).df);
}

std::vector<double> gradient(const ScalarField& f, std::span<const double> p) {
  return gradient(FieldCalculus(f), p);
}

double grad_norm_sq(const FieldCalculus& f, std::span<const double> p) {
  require_inside(f.field(), p);
  const MetricSample ms = metric_at(f.manifold(), p);
  const double n = covector_norm(ms, f.jet(p).df);
  return n * n;
}

double grad_norm_sq(const ScalarField& f, std::span<const double> p) {
  return grad_norm_sq(FieldCalculus(f), p);
}

double laplace_beltrami(const FieldCalculus& f, std::span<const double> p) {
  require_inside(f.field(), p);
  metric_at(f.manifold(), p);  // domain and positivity checks
  return f.triple(p).laplacian;
}

double laplace_beltrami(const ScalarField& f, std::span<const double> p) {
  return laplace_beltrami(FieldCalculus(f), p);
}

double laplace_beltrami_christoffel(const FieldCalculus& f, std::span<const double> p) {
  require_inside(f.field(), p);
  const Manifold& m = f.manifold();
  const std::size_t n = m.dim();
  const MetricSample ms = metric_at(m, p);
  const Christoffel gamma = christoffel_from(m, p, ms);
  const auto jet = f.jet(p);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double hess = jet.d2f[i * n + j];
      for (std::size_t k = 0; k < n; ++k) hess -= gamma(k, i, j) * jet.df[k];
      s += ms.inverse(static_cast<long>(i), static_cast<long>(j)) * hess;
    }
  }
  return s;
}

MeanCurvature mean_curvature_level_set(const FieldCalculus& f, std::span<const double> p,
                                       double eps_crit) {
  require_inside(f.field(), p);
  const Manifold& m = f.manifold();
  const std::size_t n = m.dim();
  if (n < 2) throw GeometryError("mean curvature needs dimension >= 2");
  const MetricSample ms = metric_at(m, p);
  const auto t = f.triple(p);
  const double norm = covector_norm(ms, t.df);
  if (norm <= eps_crit) {
    throw CriticalPointError("mean curvature requested at a near-critical point", norm);
  }
  const std::vector<double> grad = raise(ms, t.df);
  double grad_dot = 0.0;  // (grad f)^j d_j (grad f)^2
  for (std::size_t j = 0; j < n; ++j) grad_dot += grad[j] * t.d_grad_norm_sq[j];
  const double g2 = t.grad_norm_sq;
  const double expansion = t.laplacian / norm - grad_dot / (2.0 * g2 * std::sqrt(g2));

  MeanCurvature h;
  h.divergence = f.evaluate_normal_divergence(p);
  h.mean = h.divergence / static_cast<double>(n - 1);
  h.mean_by_expansion = expansion / static_cast<double>(n - 1);
  return h;
}

MeanCurvature mean_curvature_level_set(const ScalarField& f, std::span<const double> p,
                                       double eps_crit) {
  return mean_curvature_level_set(FieldCalculus(f), p, eps_crit);
}

double gradient_alignment(const FieldCalculus& f, std::span<const double> p, double eps_crit) {
  require_inside(f.field(), p);
  const Manifold& m = f.manifold();
  const std::size_t n = m.dim();
  const MetricSample ms = metric_at(m, p);
  const Christoffel gamma = christoffel_from(m, p, ms);
  const auto jet = f.jet(p);
  if (covector_norm(ms, jet.df) <= eps_crit) {
    throw CriticalPointError("gradient alignment requested at a near-critical point",
                             covector_norm(ms, jet.df));
  }
  std::vector<double> g(n * n);
  std::vector<double> dg(n * n * n);
  m.evaluate_metric(p, g, dg);

  const std::vector<double> w = raise(ms, jet.df);  // Y = grad f
  // d_i Y^k = (d_i g^{kl}) f_l + g^{kl} f_li, with d_i g^{kl} = -g^{ka} (d_i g_ab) g^{bl}.
  Eigen::MatrixXd dY(static_cast<long>(n), static_cast<long>(n));  // (k, i)
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::MatrixXd dgi(static_cast<long>(n), static_cast<long>(n));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        dgi(static_cast<long>(a), static_cast<long>(b)) = dg[(i * n + a) * n + b];
      }
    }
    const Eigen::MatrixXd dinv = -ms.inverse * dgi * ms.inverse;
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t l = 0; l < n; ++l) {
        s += dinv(static_cast<long>(k), static_cast<long>(l)) * jet.df[l] +
             ms.inverse(static_cast<long>(k), static_cast<long>(l)) * jet.d2f[l * n + i];
      }
      dY(static_cast<long>(k), static_cast<long>(i)) = s;
    }
  }
  // u = D_Y Y.
  std::vector<double> u(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += w[i] * dY(static_cast<long>(k), static_cast<long>(i));
      for (std::size_t j = 0; j < n; ++j) s += gamma(k, i, j) * w[i] * w[j];
    }
    u[k] = s;
  }
  const double u_norm = vector_norm(ms, u);
  if (u_norm == 0.0) return 0.0;
  const Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<long>(n));
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<long>(n));
  const double coeff = uv.dot(ms.g * wv) / wv.dot(ms.g * wv);
  const Eigen::VectorXd perp = uv - coeff * wv;
  return std::sqrt(std::max(0.0, perp.dot(ms.g * perp))) / u_norm;
}

double gradient_alignment(const ScalarField& f, std::span<const double> p, double eps_crit) {
  return gradient_alignment(FieldCalculus(f), p, eps_crit);
}

}  // namespace equipart
