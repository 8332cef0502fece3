#include "xlate/inference.hpp"

#include "xlate/parser.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace xlate {

std::size_t
levenshtein(std::string_view a, std::string_view b)
{
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j)
    row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string
node_label(const AstNode& n)
{
  if (!n.terminal)
    return n.kind;
  const std::string text = n.text.value_or("");
  if (n.anonymous())
    return text;
  return n.kind + " " + text;
}

double
rename_cost(const AstNode& a, const AstNode& b)
{
  const auto la = node_label(a);
  const auto lb = node_label(b);
  const std::size_t longest = std::max(la.size(), lb.size());
  if (longest == 0)
    return 0.0;
  return static_cast<double>(levenshtein(la, lb)) / static_cast<double>(longest);
}

namespace {

struct Flat
{
  std::vector<const AstNode*> nodes;
  std::vector<std::size_t> lmd;
  std::vector<std::size_t> keyroots;
};

std::size_t
flatten(const AstNode& n, Flat& f)
{
  std::size_t leftmost = SIZE_MAX;
  for (const auto& c : n.children) {
    const std::size_t l = flatten(*c, f);
    if (leftmost == SIZE_MAX)
      leftmost = l;
  }
  const std::size_t me = f.nodes.size();
  f.nodes.push_back(&n);
  f.lmd.push_back(leftmost == SIZE_MAX ? me : leftmost);
  return f.lmd.back();
}

Flat
flat(const AstNode& root)
{
  Flat f;
  flatten(root, f);
  std::vector<bool> seen(f.nodes.size(), false);
  for (std::size_t i = f.nodes.size(); i-- > 0;) {
    if (!seen[f.lmd[i]]) {
      seen[f.lmd[i]] = true;
      f.keyroots.push_back(i);
    }
  }
  std::sort(f.keyroots.begin(), f.keyroots.end());
  return f;
}

} // namespace

double
tree_edit_distance(const AstNode& a, const AstNode& b)
{
  const Flat fa = flat(a);
  const Flat fb = flat(b);
  const std::size_t n = fa.nodes.size();
  const std::size_t m = fb.nodes.size();
  std::vector<double> ren(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j)
      ren[i * m + j] = rename_cost(*fa.nodes[i], *fb.nodes[j]);
  }
  std::vector<double> td(n * m, 0.0);
  std::vector<double> fd;
  for (std::size_t i : fa.keyroots) {
    for (std::size_t j : fb.keyroots) {
      const std::size_t li = fa.lmd[i];
      const std::size_t lj = fb.lmd[j];
      const std::size_t rows = i - li + 2;
      const std::size_t cols = j - lj + 2;
      fd.assign(rows * cols, 0.0);
      auto at = [&](std::size_t x, std::size_t y) -> double& { return fd[x * cols + y]; };
      for (std::size_t x = 1; x < rows; ++x)
        at(x, 0) = at(x - 1, 0) + 1.0;
      for (std::size_t y = 1; y < cols; ++y)
        at(0, y) = at(0, y - 1) + 1.0;
      for (std::size_t x = li; x <= i; ++x) {
        for (std::size_t y = lj; y <= j; ++y) {
          const std::size_t xi = x - li + 1;
          const std::size_t yj = y - lj + 1;
          const double del = at(xi - 1, yj) + 1.0;
          const double ins = at(xi, yj - 1) + 1.0;
          if (fa.lmd[x] == li && fb.lmd[y] == lj) {
            at(xi, yj) = std::min({del, ins, at(xi - 1, yj - 1) + ren[x * m + y]});
            td[x * m + y] = at(xi, yj);
          } else {
            at(xi, yj) =
              std::min({del, ins, at(fa.lmd[x] - li, fb.lmd[y] - lj) + td[x * m + y]});
          }
        }
      }
    }
  }
  return td[(n - 1) * m + (m - 1)];
}

// ---- fragments -----------------------------------------------------------------

namespace {

const AstNode*
find_span(const AstNode& n, const Span& s)
{
  if (n.span && *n.span == s)
    return &n;
  for (const auto& c : n.children) {
    if (const auto* hit = find_span(*c, s))
      return hit;
  }
  return nullptr;
}

AstPtr
find_span_ptr(const AstPtr& n, const Span& s)
{
  if (n->span && *n->span == s)
    return n;
  for (const auto& c : n->children) {
    if (auto hit = find_span_ptr(c, s))
      return hit;
  }
  return nullptr;
}

std::vector<std::string>
snippet_lines(std::string_view code)
{
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= code.size()) {
    std::size_t end = code.find('\n', pos);
    if (end == std::string_view::npos)
      end = code.size();
    std::string line(code.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos)
      out.push_back(line);
    pos = end + 1;
  }
  return out;
}

} // namespace

std::vector<AstPtr>
extract_fragments(std::string_view code, const GrammarDef& grammar,
                  const std::vector<Span>& highlights)
{
  const auto lines = snippet_lines(code);
  if (!highlights.empty() && highlights.size() != lines.size())
    throw InferenceError("expected one highlight per snippet line");
  std::vector<AstPtr> out;
  int statements = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto trimmed = lines[i].substr(lines[i].find_first_not_of(" \t"));
    AstPtr tree;
    try {
      tree = parse_source(grammar, trimmed + "\n");
    } catch (const ParseError& e) {
      throw SnippetParseError(e.what(), i);
    }
    if (!highlights.empty()) {
      auto hit = find_span_ptr(tree, highlights[i]);
      if (!hit)
        throw SnippetParseError("highlight does not cover a single node", i);
      out.push_back(hit);
      continue;
    }
    if (tree->terminal || tree->children.size() != 1)
      throw SnippetParseError("expected exactly one statement", i);
    AstPtr stmt = tree->children[0];
    if (stmt->kind == "expression_statement" && !stmt->children.empty()) {
      out.push_back(stmt->children[0]);
    } else {
      out.push_back(stmt);
      ++statements;
    }
  }
  if (statements != 0 && statements != static_cast<int>(out.size()))
    throw MixedKinds("snippet lines mix statements and expressions");
  return out;
}

// ---- templates -----------------------------------------------------------------

namespace {

Pattern
nonterminal(const std::string& lang, const std::string& kind, std::vector<Pattern> kids)
{
  Pattern p;
  p.type = PatternType::NonTerminal;
  p.lang = lang;
  p.symbol = kind;
  p.children = std::move(kids);
  return p;
}

Pattern
str(const std::string& text)
{
  Pattern p;
  p.type = PatternType::Str;
  p.text = text;
  return p;
}

bool
compatible(const AstNode& a, const AstNode& b)
{
  return a.terminal == b.terminal && a.kind == b.kind;
}

class TemplateBuilder
{
public:
  TemplateBuilder(const GrammarDef& g, std::string lang)
    : grammar_(g)
    , lang_(std::move(lang))
  {
  }

  Pattern concrete(const AstNode& n) const
  {
    if (n.terminal) {
      if (n.anonymous())
        return str(*n.text);
      return nonterminal(lang_, n.kind, {str(n.text.value_or(""))});
    }
    std::vector<Pattern> kids;
    for (const auto& c : n.children)
      kids.push_back(concrete(*c));
    return nonterminal(lang_, n.kind, std::move(kids));
  }

  Pattern node(const std::vector<AstPtr>& xs)
  {
    const AstNode& first = *xs[0];
    const bool all_equal = std::all_of(xs.begin(), xs.end(), [&](const AstPtr& x) {
      return structurally_equal(*x, first);
    });
    if (all_equal)
      return concrete(first);
    const bool same_kind = std::all_of(xs.begin(), xs.end(), [&](const AstPtr& x) {
      return compatible(*x, first);
    });
    if (same_kind && first.terminal && !first.anonymous()) {
      Site s;
      s.type = grammar_.value_tokens.count(first.kind) ? PatternType::ValTpl
                                                       : PatternType::StrTpl;
      s.index = static_cast<int>(out.templates.size()) + 1;
      for (const auto& x : xs)
        s.values.push_back(x->text.value_or(""));
      Pattern t;
      t.type = s.type;
      t.index = s.index;
      out.templates.push_back(std::move(s));
      return nonterminal(lang_, first.kind, {t});
    }
    if (same_kind && !first.terminal)
      return children(xs);
    return capture(PatternType::Single, xs, {});
  }

  AstTemplate out;

private:
  Pattern capture(PatternType type, const std::vector<AstPtr>& xs,
                  std::vector<std::vector<AstPtr>> slices)
  {
    Site s;
    s.type = type;
    s.index = static_cast<int>(out.captures.size()) + 1;
    if (type == PatternType::Single) {
      for (const auto& x : xs)
        s.instances.push_back({x});
    } else {
      s.instances = std::move(slices);
    }
    Pattern p;
    p.type = type;
    p.index = s.index;
    out.captures.push_back(std::move(s));
    return p;
  }

  Pattern children(const std::vector<AstPtr>& xs)
  {
    const AstNode& first = *xs[0];
    const std::size_t count = first.children.size();
    const bool same_count = std::all_of(xs.begin(), xs.end(), [&](const AstPtr& x) {
      return x->children.size() == count;
    });
    std::vector<Pattern> kids;
    auto column = [&](std::size_t from_left, bool from_right) {
      std::vector<AstPtr> col;
      for (const auto& x : xs) {
        const auto& ch = x->children;
        col.push_back(from_right ? ch[ch.size() - 1 - from_left] : ch[from_left]);
      }
      return col;
    };
    if (same_count) {
      for (std::size_t i = 0; i < count; ++i)
        kids.push_back(node(column(i, false)));
      return nonterminal(lang_, first.kind, std::move(kids));
    }
    std::size_t shortest = SIZE_MAX;
    for (const auto& x : xs)
      shortest = std::min(shortest, x->children.size());
    auto column_ok = [&](std::size_t k, bool from_right) {
      const auto col = column(k, from_right);
      return std::all_of(col.begin(), col.end(),
                         [&](const AstPtr& c) { return compatible(*c, *col[0]); });
    };
    std::size_t prefix = 0;
    while (prefix < shortest && column_ok(prefix, false))
      ++prefix;
    std::size_t suffix = 0;
    while (prefix + suffix < shortest && column_ok(suffix, true))
      ++suffix;
    for (std::size_t i = 0; i < prefix; ++i)
      kids.push_back(node(column(i, false)));
    std::vector<std::vector<AstPtr>> slices;
    for (const auto& x : xs) {
      const auto& ch = x->children;
      slices.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(prefix),
                          ch.end() - static_cast<std::ptrdiff_t>(suffix));
    }
    kids.push_back(capture(PatternType::Sequence, xs, std::move(slices)));
    for (std::size_t k = suffix; k-- > 0;)
      kids.push_back(node(column(k, true)));
    return nonterminal(lang_, first.kind, std::move(kids));
  }

  const GrammarDef& grammar_;
  std::string lang_;
};

} // namespace

AstTemplate
simultaneous_traversal(const std::vector<AstPtr>& fragments, const GrammarDef& grammar,
                       const std::string& lang)
{
  if (fragments.empty())
    throw InferenceError("no fragments");
  for (const auto& f : fragments) {
    if (!compatible(*f, *fragments[0]))
      throw IncompatibleRoots("fragment roots differ: " + fragments[0]->kind + " vs " +
                              f->kind);
  }
  TemplateBuilder b(grammar, lang);
  b.out.root = b.node(fragments);
  return std::move(b.out);
}

std::string
rule_lang(const GrammarDef& grammar)
{
  const auto& name = grammar.language_name;
  if (name.rfind("python", 0) == 0)
    return "py";
  return name.substr(0, name.find('_'));
}

// ---- linking -------------------------------------------------------------------

namespace {

AstPtr
as_tree(const std::vector<AstPtr>& nodes)
{
  if (nodes.size() == 1)
    return nodes[0];
  return AstNode::make_node("*", nodes);
}

std::string
unquoted(const std::string& s)
{
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

bool
values_match(const Site& src, const Site& trg)
{
  for (std::size_t i = 0; i < src.values.size(); ++i) {
    const bool val = src.type == PatternType::ValTpl || trg.type == PatternType::ValTpl;
    const bool eq = val ? unquoted(src.values[i]) == unquoted(trg.values[i])
                        : src.values[i] == trg.values[i];
    if (!eq)
      return false;
  }
  return true;
}

struct Links
{
  std::vector<int> capture;
  std::vector<int> templ;
};

void
relink(Pattern& p, const Links& links)
{
  if (p.is_capture())
    p.index = links.capture[static_cast<std::size_t>(p.index - 1)];
  else if (p.is_template())
    p.index = links.templ[static_cast<std::size_t>(p.index - 1)];
  for (auto& c : p.children)
    relink(c, links);
}

} // namespace

Inference
infer_rule(const std::vector<AstPtr>& src_fragments, const std::vector<AstPtr>& trg_fragments,
           const GrammarDef& src_grammar, const GrammarDef& trg_grammar)
{
  if (src_fragments.size() != trg_fragments.size())
    throw InferenceError("source and target snippets have different line counts");
  if (src_fragments.empty() || src_fragments.size() > 2)
    throw InferenceError("expected one or two snippet lines");
  auto src = simultaneous_traversal(src_fragments, src_grammar, rule_lang(src_grammar));
  auto trg = simultaneous_traversal(trg_fragments, trg_grammar, rule_lang(trg_grammar));
  if (src.root.type != PatternType::NonTerminal)
    throw IncompatibleRoots("source fragments share no root node");

  Inference result;
  Links links;
  constexpr double eps = 1e-9;
  for (const auto& t : trg.captures) {
    if (src.captures.empty())
      throw UnexpectedTemplate("target hole " + std::to_string(t.index) +
                               " has no source capture to link to");
    std::vector<double> cost;
    for (const auto& s : src.captures) {
      double sum = 0;
      for (std::size_t i = 0; i < t.instances.size(); ++i)
        sum += tree_edit_distance(*as_tree(s.instances[i]), *as_tree(t.instances[i]));
      cost.push_back(sum);
    }
    const double best = *std::min_element(cost.begin(), cost.end());
    std::vector<int> tied;
    for (std::size_t k = 0; k < cost.size(); ++k) {
      if (cost[k] <= best + eps)
        tied.push_back(static_cast<int>(k) + 1);
    }
    links.capture.push_back(tied[0]);
    if (tied.size() > 1)
      result.ambiguous.push_back({t.index, tied});

    // Per-instance check of the closest-subtree assumption.
    for (std::size_t i = 0; i < t.instances.size(); ++i) {
      double mine = 0;
      double other_best = INFINITY;
      for (std::size_t k = 0; k < src.captures.size(); ++k) {
        const double d =
          tree_edit_distance(*as_tree(src.captures[k].instances[i]), *as_tree(t.instances[i]));
        if (static_cast<int>(k) + 1 == tied[0])
          mine = d;
        else
          other_best = std::min(other_best, d);
      }
      if (other_best + eps < mine)
        result.warnings.push_back("target hole " + std::to_string(t.index) + " in line " +
                                  std::to_string(i + 1) +
                                  " is closer to another source capture");
    }
  }
  for (const auto& t : trg.templates) {
    int hit = 0;
    for (const auto& s : src.templates) {
      if (values_match(s, t)) {
        hit = s.index;
        break;
      }
    }
    if (hit == 0)
      throw UnexpectedTemplate("target template placeholder " + std::to_string(t.index) +
                               " matches no source template");
    links.templ.push_back(hit);
  }
  relink(trg.root, links);
  result.rule = make_rule({std::move(src.root)}, {std::move(trg.root)}, Provenance::Inferred);
  return result;
}

Inference
infer_rule(std::string_view src_snippet, std::string_view trg_snippet,
           const GrammarDef& src_grammar, const GrammarDef& trg_grammar)
{
  return infer_rule(extract_fragments(src_snippet, src_grammar),
                    extract_fragments(trg_snippet, trg_grammar), src_grammar, trg_grammar);
}

} // namespace xlate
