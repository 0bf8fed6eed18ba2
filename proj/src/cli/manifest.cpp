#include "equipart/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace equipart {

std::string SourceSpan::to_string() const {
  return file + ":" + std::to_string(line) + ":" + std::to_string(column);
}

ManifestError::ManifestError(const SourceSpan& where, const std::string& message)
    : Error(where.to_string() + ": " + message), where_(where) {}

namespace {

struct Piece {
  std::string_view text;
  std::size_t offset = 0;  // into the manifest
};

struct Statement {
  Piece key;
  Piece let_name;  // only for `let`
  Piece value;
};

struct Block {
  Piece kind;
  Piece name;
  Piece on;  // field / vfield only
  std::vector<Statement> statements;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

Piece trim(Piece p) {
  std::size_t b = 0;
  std::size_t e = p.text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(p.text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(p.text[e - 1]))) --e;
  return {p.text.substr(b, e - b), p.offset + b};
}

class Reader {
 public:
  Reader(std::string_view text, std::string path) : text_(text), path_(std::move(path)) {
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < text_.size(); ++i) {
      if (text_[i] == '\n') line_starts_.push_back(i + 1);
    }
  }

  SourceSpan span(std::size_t offset) const {
    const auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    const std::size_t line = static_cast<std::size_t>(it - line_starts_.begin());
    return {path_, line, offset - line_starts_[line - 1] + 1};
  }

  [[noreturn]] void fail(std::size_t offset, const std::string& message) const {
    throw ManifestError(span(offset), message);
  }

  void skip() {
    for (;;) {
      while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
        continue;
      }
      return;
    }
  }

  bool eof() {
    skip();
    return pos_ >= text_.size();
  }

  bool peek(char c) {
    skip();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  void expect(char c) {
    skip();
    if (pos_ >= text_.size() || text_[pos_] != c) {
      fail(pos_, std::string("expected '") + c + "'" +
                     (pos_ < text_.size() ? std::string(", found '") + text_[pos_] + "'"
                                          : std::string(", found end of file")));
    }
    ++pos_;
  }

  Piece ident(const char* what) {
    skip();
    if (pos_ >= text_.size() || !is_ident_start(text_[pos_])) fail(pos_, std::string("expected ") + what);
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    return {text_.substr(start, pos_ - start), start};
  }

  // Raw text up to the next ';' outside brackets (or, when `line_end`, up to
  // the end of the line or a trailing comment). Comments are not allowed
  // inside ';'-terminated values.
  Piece value(bool line_end = false) {
    skip();
    const std::size_t start = pos_;
    int depth = 0;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(' || c == '[') ++depth;
      if (c == ')' || c == ']') --depth;
      if (depth == 0 && (c == ';' || c == '}' || (line_end && (c == '\n' || c == '#')))) break;
      ++pos_;
    }
    Piece p = trim({text_.substr(start, pos_ - start), start});
    if (pos_ < text_.size() && text_[pos_] == ';') {
      ++pos_;
    } else if (!line_end) {
      fail(pos_, "expected ';' after value");
    }
    if (p.text.empty()) fail(start, "empty value");
    return p;
  }

 private:
  std::string_view text_;
  std::string path_;
  std::size_t pos_ = 0;
  std::vector<std::size_t> line_starts_;
};

std::vector<Piece> split_top(Piece p, char sep) {
  std::vector<Piece> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= p.text.size(); ++i) {
    const char c = i < p.text.size() ? p.text[i] : sep;
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (depth == 0 && c == sep) {
      out.push_back(trim({p.text.substr(start, i - start), p.offset + start}));
      start = i + 1;
    }
  }
  return out;
}

// Strips an enclosing pair like "( ... )".
std::optional<Piece> strip(Piece p, char open, char close) {
  p = trim(p);
  if (p.text.size() < 2 || p.text.front() != open || p.text.back() != close) return std::nullopt;
  return trim({p.text.substr(1, p.text.size() - 2), p.offset + 1});
}

class Builder {
 public:
  Builder(const Reader& reader, Manifest& out) : reader_(reader), out_(out) {
    globals_["pi"] = Expression::constant(std::numbers::pi);
  }

  Expression expr(Piece p, std::span<const std::string> vars, const LetBindings& lets) const {
    try {
      return parse(p.text, vars, lets);
    } catch (const ParseError& e) {
      reader_.fail(p.offset + e.position(), e.detail());
    }
  }

  double constant(Piece p) const {
    const Expression e = expr(p, {}, globals_);
    try {
      const double v = evaluate(e, std::span<const double>{});
      if (!std::isfinite(v)) reader_.fail(p.offset, "value is not finite");
      return v;
    } catch (const DomainError& e) {
      reader_.fail(p.offset, e.what());
    }
  }

  std::uint64_t integer(Piece p) const {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(p.text.data(), p.text.data() + p.text.size(), v);
    if (ec != std::errc() || end != p.text.data() + p.text.size()) {
      reader_.fail(p.offset, "expected a non-negative integer, found `" + std::string(p.text) + "`");
    }
    return v;
  }

  std::vector<Interval> box(Piece p, std::size_t dim) const {
    std::vector<Interval> out;
    for (const Piece& item : split_top(p, ',')) {
      const auto inner = strip(item, '[', ']');
      if (!inner) reader_.fail(item.offset, "box entries look like [lo, hi]");
      const auto ends = split_top(*inner, ',');
      if (ends.size() != 2) reader_.fail(item.offset, "box entries look like [lo, hi]");
      Interval iv{constant(ends[0]), constant(ends[1])};
      if (!(iv.hi > iv.lo)) reader_.fail(item.offset, "box interval is empty");
      out.push_back(iv);
    }
    if (out.size() != dim) {
      reader_.fail(p.offset, "box has " + std::to_string(out.size()) + " intervals for " +
                                 std::to_string(dim) + " coordinates");
    }
    return out;
  }

  Domain domain(Piece p, std::span<const std::string> vars, const LetBindings& lets) const {
    try {
      return Domain::parse(p.text, vars, lets);
    } catch (const ParseError& e) {
      reader_.fail(p.offset + e.position(), e.detail());
    }
  }

  template <typename Entries>
  void check_unique(const Entries& entries, const Block& b, const char* kind) const {
    for (const auto& e : entries) {
      if (name_of(e) == b.name.text) {
        reader_.fail(b.name.offset, std::string("duplicate ") + kind + " `" + std::string(b.name.text) +
                                        "` (first defined at " + e.span.to_string() + ")");
      }
    }
  }

  void manifold(const Block& b) {
    check_unique(out_.manifolds, b, "manifold");
    std::vector<std::string> coords;
    std::optional<std::size_t> dim;
    LetBindings lets = globals_;
    std::optional<Piece> metric;
    std::optional<Piece> domain_text;
    std::optional<Piece> box_text;
    std::optional<Piece> center_text;
    std::optional<Piece> rmax_text;
    for (const Statement& s : b.statements) {
      const std::string_view k = s.key.text;
      if (k == "dim") {
        dim = integer(s.value);
      } else if (k == "coords") {
        for (const Piece& c : split_top(s.value, ',')) {
          if (c.text.empty() || !is_ident_start(c.text[0]) ||
              !std::all_of(c.text.begin(), c.text.end(), is_ident_char)) {
            reader_.fail(c.offset, "coordinate names must be identifiers");
          }
          if (std::find(coords.begin(), coords.end(), c.text) != coords.end()) {
            reader_.fail(c.offset, "duplicate coordinate `" + std::string(c.text) + "`");
          }
          coords.emplace_back(c.text);
        }
      } else if (k == "let") {
        if (coords.empty()) reader_.fail(s.key.offset, "`let` must come after `coords`");
        lets[std::string(s.let_name.text)] = expr(s.value, coords, lets);
      } else if (k == "metric") {
        metric = s.value;
      } else if (k == "domain") {
        domain_text = s.value;
      } else if (k == "box") {
        box_text = s.value;
      } else if (k == "center") {
        center_text = s.value;
      } else if (k == "rmax") {
        rmax_text = s.value;
      } else {
        unknown_key(s, "manifold", "dim, coords, let, metric, domain, box, center, rmax");
      }
    }
    if (coords.empty()) reader_.fail(b.name.offset, "manifold `" + std::string(b.name.text) + "` has no coords");
    if (dim && *dim != coords.size()) {
      reader_.fail(b.name.offset, "dim = " + std::to_string(*dim) + " but " +
                                      std::to_string(coords.size()) + " coordinates are listed");
    }
    if (!metric) reader_.fail(b.name.offset, "manifold `" + std::string(b.name.text) + "` has no metric");
    const std::size_t n = coords.size();

    std::vector<std::vector<Expression>> rows(n, std::vector<Expression>(n));
    if (metric->text.starts_with("diag")) {
      const auto inner = strip({metric->text.substr(4), metric->offset + 4}, '(', ')');
      if (!inner) reader_.fail(metric->offset, "expected diag(g_11, ..., g_nn)");
      const auto items = split_top(*inner, ',');
      if (items.size() != n) {
        reader_.fail(metric->offset, "diag has " + std::to_string(items.size()) + " entries for " +
                                         std::to_string(n) + " coordinates");
      }
      for (std::size_t i = 0; i < n; ++i) rows[i][i] = expr(items[i], coords, lets);
    } else {
      const auto inner = strip(*metric, '[', ']');
      if (!inner) reader_.fail(metric->offset, "metric must be [[...], ...] or diag(...)");
      const auto row_items = split_top(*inner, ',');
      if (row_items.size() != n) {
        reader_.fail(metric->offset, "metric has " + std::to_string(row_items.size()) +
                                         " rows for " + std::to_string(n) + " coordinates");
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = strip(row_items[i], '[', ']');
        if (!row) reader_.fail(row_items[i].offset, "metric rows look like [g_i1, ..., g_in]");
        const auto items = split_top(*row, ',');
        if (items.size() != n) {
          reader_.fail(row_items[i].offset, "metric row has " + std::to_string(items.size()) +
                                                " entries, expected " + std::to_string(n));
        }
        for (std::size_t j = 0; j < n; ++j) rows[i][j] = expr(items[j], coords, lets);
      }
    }

    ManifoldEntry entry;
    entry.span = reader_.span(b.name.offset);
    const Domain dom = domain_text ? domain(*domain_text, coords, lets) : Domain{};
    LetBindings own_lets = lets;
    own_lets.erase("pi");
    try {
      entry.manifold = std::make_shared<const Manifold>(std::string(b.name.text), coords, rows,
                                                        dom, std::move(own_lets));
    } catch (const GeometryError& e) {
      reader_.fail(metric->offset, e.what());
    }
    if (box_text) entry.box = box(*box_text, n);
    if (center_text) {
      Point c;
      for (const Piece& p : split_top(*center_text, ',')) c.push_back(constant(p));
      if (c.size() != n) reader_.fail(center_text->offset, "center needs " + std::to_string(n) + " coordinates");
      entry.center = c;
    }
    if (rmax_text) entry.rmax = constant(*rmax_text);
    manifold_lets_.push_back(lets);
    out_.manifolds.push_back(std::move(entry));
  }

  std::pair<const ManifoldEntry*, const LetBindings*> owner(const Block& b) const {
    for (std::size_t i = 0; i < out_.manifolds.size(); ++i) {
      if (out_.manifolds[i].manifold->name() == b.on.text) {
        return {&out_.manifolds[i], &manifold_lets_[i]};
      }
    }
    reader_.fail(b.on.offset, "unknown manifold `" + std::string(b.on.text) + "`");
  }

  void field(const Block& b) {
    check_unique(out_.fields, b, "field");
    const auto [m, lets] = owner(b);
    const auto& coords = m->manifold->coords();
    std::optional<Expression> e;
    Domain dom;
    FieldEntry entry;
    for (const Statement& s : b.statements) {
      if (s.key.text == "expr") {
        e = expr(s.value, coords, *lets);
      } else if (s.key.text == "domain") {
        dom = domain(s.value, coords, *lets);
      } else if (s.key.text == "box") {
        entry.box = box(s.value, coords.size());
      } else if (s.key.text == "symmetries") {
        for (const Piece& x : split_top(s.value, ',')) {
          entry.symmetries.emplace_back(x.text);
          symmetry_refs_.push_back({x, std::string(b.on.text)});
        }
      } else {
        unknown_key(s, "field", "expr, domain, box, symmetries");
      }
    }
    if (!e) reader_.fail(b.name.offset, "field `" + std::string(b.name.text) + "` has no expr");
    entry.manifold = m->manifold->name();
    entry.span = reader_.span(b.name.offset);
    entry.field = std::make_shared<const ScalarField>(m->manifold, *e, std::string(b.name.text), dom);
    out_.fields.push_back(std::move(entry));
  }

  // Every `symmetries` entry must name a vfield on the same manifold.
  void resolve_symmetries() const {
    for (const auto& [ref, manifold] : symmetry_refs_) {
      const auto it = std::find_if(out_.vfields.begin(), out_.vfields.end(),
                                   [&](const VectorFieldEntry& v) { return v.field->name == ref.text; });
      if (it == out_.vfields.end()) {
        reader_.fail(ref.offset, "unknown vfield `" + std::string(ref.text) + "`");
      }
      if (it->manifold != manifold) {
        reader_.fail(ref.offset, "vfield `" + std::string(ref.text) + "` lives on `" + it->manifold +
                                     "`, not on `" + manifold + "`");
      }
    }
  }

  void vfield(const Block& b) {
    check_unique(out_.vfields, b, "vfield");
    const auto [m, lets] = owner(b);
    const auto& coords = m->manifold->coords();
    std::optional<std::vector<Expression>> comps;
    for (const Statement& s : b.statements) {
      if (s.key.text == "components") {
        const auto inner = strip(s.value, '(', ')');
        if (!inner) reader_.fail(s.value.offset, "components look like (X^1, ..., X^n)");
        const auto items = split_top(*inner, ',');
        if (items.size() != coords.size()) {
          reader_.fail(s.value.offset, std::to_string(items.size()) + " components on a " +
                                           std::to_string(coords.size()) + "-dimensional manifold");
        }
        comps.emplace();
        for (const Piece& p : items) comps->push_back(expr(p, coords, *lets));
      } else {
        unknown_key(s, "vfield", "components");
      }
    }
    if (!comps) reader_.fail(b.name.offset, "vfield `" + std::string(b.name.text) + "` has no components");
    VectorFieldEntry entry;
    entry.manifold = m->manifold->name();
    entry.span = reader_.span(b.name.offset);
    entry.field = std::make_shared<const VectorField>(m->manifold, *comps, std::string(b.name.text));
    out_.vfields.push_back(std::move(entry));
  }

  void warp(const Block& b) {
    check_unique(out_.warps, b, "warp");
    std::optional<Piece> f;
    std::optional<Piece> range;
    for (const Statement& s : b.statements) {
      if (s.key.text == "f") {
        f = s.value;
      } else if (s.key.text == "range") {
        range = s.value;
      } else {
        unknown_key(s, "warp", "f, range");
      }
    }
    if (!f || !range) reader_.fail(b.name.offset, "warp needs both `f` and `range`");
    const auto ends = split_top(*range, ':');
    if (ends.size() != 2) reader_.fail(range->offset, "range looks like lo:hi");
    const std::vector<std::string> vars{"r"};
    const Expression fe = expr(*f, vars, globals_);
    WarpEntry entry;
    entry.span = reader_.span(b.name.offset);
    try {
      entry.warp = std::make_shared<const WarpedPlane>(std::string(b.name.text), fe,
                                                       constant(ends[0]), constant(ends[1]));
    } catch (const Error& e) {
      reader_.fail(f->offset, e.what());
    }
    out_.warps.push_back(std::move(entry));
  }

  void plan(const Block& b) {
    check_unique(out_.plans, b, "plan");
    PlanEntry entry;
    entry.name = std::string(b.name.text);
    entry.span = reader_.span(b.name.offset);
    for (const Statement& s : b.statements) {
      if (s.key.text == "samples") {
        entry.samples = integer(s.value);
        if (*entry.samples == 0) reader_.fail(s.value.offset, "samples must be at least 1");
      } else if (s.key.text == "seed") {
        entry.seed = integer(s.value);
      } else if (s.key.text == "tol") {
        entry.tol = constant(s.value);
      } else if (s.key.text == "eps_crit") {
        entry.eps_crit = constant(s.value);
      } else {
        unknown_key(s, "plan", "samples, seed, tol, eps_crit");
      }
    }
    out_.plans.push_back(std::move(entry));
  }

 private:
  [[noreturn]] void unknown_key(const Statement& s, const char* kind, const char* known) const {
    reader_.fail(s.key.offset, "unknown key `" + std::string(s.key.text) + "` in " + kind +
                                   " (known: " + known + ")");
  }

  static std::string_view name_of(const ManifoldEntry& e) { return e.manifold->name(); }
  static std::string_view name_of(const FieldEntry& e) { return e.field->name; }
  static std::string_view name_of(const VectorFieldEntry& e) { return e.field->name; }
  static std::string_view name_of(const WarpEntry& e) { return e.warp->name(); }
  static std::string_view name_of(const PlanEntry& e) { return e.name; }

  const Reader& reader_;
  Manifest& out_;
  LetBindings globals_;
  std::vector<LetBindings> manifold_lets_;
  std::vector<std::pair<Piece, std::string>> symmetry_refs_;
};

template <typename Entries>
const auto& find_named(const Entries& entries, std::string_view name, const char* kind,
                       auto name_of) {
  for (const auto& e : entries) {
    if (name_of(e) == name) return e;
  }
  std::string known;
  for (const auto& e : entries) known += (known.empty() ? "" : ", ") + std::string(name_of(e));
  throw Error(std::string("no ") + kind + " named `" + std::string(name) + "` in the manifest" +
              (known.empty() ? std::string(" (none defined)") : " (known: " + known + ")"));
}

}  // namespace

const ManifoldEntry& Manifest::manifold(std::string_view name) const {
  return find_named(manifolds, name, "manifold",
                    [](const ManifoldEntry& e) -> std::string_view { return e.manifold->name(); });
}
const FieldEntry& Manifest::field(std::string_view name) const {
  return find_named(fields, name, "field",
                    [](const FieldEntry& e) -> std::string_view { return e.field->name; });
}
const VectorFieldEntry& Manifest::vfield(std::string_view name) const {
  return find_named(vfields, name, "vfield",
                    [](const VectorFieldEntry& e) -> std::string_view { return e.field->name; });
}
const WarpEntry& Manifest::warp(std::string_view name) const {
  return find_named(warps, name, "warp",
                    [](const WarpEntry& e) -> std::string_view { return e.warp->name(); });
}
const PlanEntry& Manifest::plan(std::string_view name) const {
  return find_named(plans, name, "plan",
                    [](const PlanEntry& e) -> std::string_view { return e.name; });
}

Manifest parse_manifest(std::string_view text, const std::string& path) {
  Reader reader(text, path);
  Manifest out;
  out.path = path;
  std::vector<Block> blocks;
  bool have_version = false;
  while (!reader.eof()) {
    const Piece word = reader.ident("`version`, `manifold`, `field`, `vfield`, `warp` or `plan`");
    if (word.text == "version") {
      reader.expect('=');
      const Piece v = reader.value(true);
      if (v.text != "1") reader.fail(v.offset, "unsupported manifest version `" + std::string(v.text) + "` (expected 1)");
      if (have_version) reader.fail(word.offset, "version given twice");
      have_version = true;
      continue;
    }
    if (word.text != "manifold" && word.text != "field" && word.text != "vfield" &&
        word.text != "warp" && word.text != "plan") {
      reader.fail(word.offset, "unknown section `" + std::string(word.text) +
                                   "` (expected manifold, field, vfield, warp or plan)");
    }
    if (!have_version) reader.fail(word.offset, "the manifest must start with `version = 1`");
    Block b;
    b.kind = word;
    b.name = reader.ident("a name");
    if (word.text == "field" || word.text == "vfield") {
      const Piece on = reader.ident("`on`");
      if (on.text != "on") reader.fail(on.offset, "expected `on <manifold>`");
      b.on = reader.ident("a manifold name");
    }
    reader.expect('{');
    while (!reader.peek('}')) {
      if (reader.eof()) reader.fail(b.name.offset, "unterminated block `" + std::string(b.name.text) + "`");
      Statement s;
      s.key = reader.ident("a key");
      if (s.key.text == "let") s.let_name = reader.ident("a name after `let`");
      reader.expect('=');
      s.value = reader.value();
      b.statements.push_back(s);
    }
    reader.expect('}');
    blocks.push_back(std::move(b));
  }
  if (!have_version) reader.fail(0, "the manifest must start with `version = 1`");

  Builder build(reader, out);
  for (const Block& b : blocks) {
    if (b.kind.text == "manifold") build.manifold(b);
  }
  for (const Block& b : blocks) {
    if (b.kind.text == "field") build.field(b);
    if (b.kind.text == "vfield") build.vfield(b);
    if (b.kind.text == "warp") build.warp(b);
    if (b.kind.text == "plan") build.plan(b);
  }
  build.resolve_symmetries();
  return out;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read manifest `" + path + "`");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path);
}

}  // namespace equipart
