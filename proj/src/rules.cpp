#include "xlate/rules.hpp"

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

namespace xlate {

std::string_view
to_string(Provenance p)
{
  switch (p) {
    case Provenance::Base:
      return "base";
    case Provenance::Inferred:
      return "inferred";
    case Provenance::HandEdited:
      return "hand_edited";
  }
  return "base";
}

const Rule*
Ruleset::find(std::string_view id) const
{
  for (const auto& r : rules) {
    if (r.id == id)
      return &r;
  }
  return nullptr;
}

int
Ruleset::position(std::string_view id) const
{
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (rules[i].id == id)
      return static_cast<int>(i);
  }
  return -1;
}

namespace {

// ---- reading ---------------------------------------------------------------

struct SExpr
{
  bool list = false;
  bool quoted = false;
  std::string atom;
  std::vector<SExpr> items;
  std::size_t line = 0;
};

struct TopForm
{
  SExpr expr;
  Provenance provenance = Provenance::Base;
};

class Reader
{
public:
  explicit Reader(std::string_view text)
    : s_(text)
  {
  }

  std::vector<TopForm> read_all()
  {
    std::vector<TopForm> out;
    std::optional<Provenance> pending;
    while (true) {
      skip_space(&pending);
      if (pos_ >= s_.size())
        break;
      TopForm f;
      f.expr = read();
      f.provenance = pending.value_or(Provenance::Base);
      pending.reset();
      out.push_back(std::move(f));
    }
    return out;
  }

private:
  [[noreturn]] void fail(const std::string& what) const
  {
    throw DslSyntaxError(what, line_);
  }

  void skip_space(std::optional<Provenance>* pending)
  {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        const auto end = s_.find('\n', pos_);
        auto comment = s_.substr(pos_, end == std::string_view::npos
                                          ? std::string_view::npos
                                          : end - pos_);
        if (pending) {
          if (comment.find("@inferred") != std::string_view::npos)
            *pending = Provenance::Inferred;
          else if (comment.find("@hand_edited") != std::string_view::npos)
            *pending = Provenance::HandEdited;
        }
        pos_ = end == std::string_view::npos ? s_.size() : end;
      } else {
        break;
      }
    }
  }

  SExpr read()
  {
    skip_space(nullptr);
    if (pos_ >= s_.size())
      fail("unexpected end of input");
    SExpr e;
    e.line = line_;
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      e.list = true;
      while (true) {
        skip_space(nullptr);
        if (pos_ >= s_.size())
          fail("unbalanced '('");
        if (s_[pos_] == ')') {
          ++pos_;
          break;
        }
        e.items.push_back(read());
      }
      return e;
    }
    if (c == ')')
      fail("unexpected ')'");
    if (c == '"') {
      ++pos_;
      e.quoted = true;
      while (true) {
        if (pos_ >= s_.size() || s_[pos_] == '\n')
          fail("unterminated string");
        char d = s_[pos_++];
        if (d == '"')
          break;
        if (d == '\\') {
          if (pos_ >= s_.size())
            fail("unterminated string");
          d = s_[pos_++];
          if (d == 'n')
            d = '\n';
          else if (d == 't')
            d = '\t';
        }
        e.atom.push_back(d);
      }
      return e;
    }
    while (pos_ < s_.size()) {
      const char d = s_[pos_];
      if (std::isspace(static_cast<unsigned char>(d)) || d == '(' || d == ')' ||
          d == '"')
        break;
      e.atom.push_back(d);
      ++pos_;
    }
    return e;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

std::optional<int>
number_in(std::string_view s)
{
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v <= 0)
    return std::nullopt;
  return v;
}

// Recognizes `_strK_`, `_valK_`, `_ntK_` (with K) and `_str_` etc. (without).
bool
template_atom(std::string_view atom, std::string_view base, int* index)
{
  const std::string prefix = "_" + std::string(base);
  if (atom.size() < prefix.size() + 1 || atom.substr(0, prefix.size()) != prefix ||
      atom.back() != '_')
    return false;
  auto mid = atom.substr(prefix.size(), atom.size() - prefix.size() - 1);
  if (mid.empty()) {
    *index = 0;
    return true;
  }
  auto n = number_in(mid);
  if (!n)
    return false;
  *index = *n;
  return true;
}

Pattern
to_pattern(const SExpr& e, bool matcher)
{
  auto fail = [&](const std::string& what) -> Pattern {
    throw DslSyntaxError(what, e.line);
  };
  auto check_index = [&](int index) {
    if (matcher && index != 0)
      fail("indexed placeholder in a source pattern");
    if (!matcher && index == 0)
      fail("placeholder without index in a target pattern");
  };

  Pattern p;
  if (!e.list) {
    if (e.quoted)
      return fail("bare string; use (str \"...\")");
    const std::string& a = e.atom;
    int index = 0;
    if (!a.empty() && (a[0] == '.' || a[0] == '*')) {
      p.type = a[0] == '.' ? PatternType::Single : PatternType::Sequence;
      if (a.size() > 1) {
        auto n = number_in(std::string_view(a).substr(1));
        if (!n)
          return fail("bad placeholder '" + a + "'");
        index = *n;
      }
      check_index(index);
      p.index = index;
      return p;
    }
    if (template_atom(a, "str", &index))
      p.type = PatternType::StrTpl;
    else if (template_atom(a, "val", &index))
      p.type = PatternType::ValTpl;
    else
      return fail("unexpected atom '" + a + "'");
    check_index(index);
    p.index = index;
    return p;
  }

  if (e.items.empty() || e.items[0].list || e.items[0].quoted)
    return fail("expected a node form");
  const std::string& head = e.items[0].atom;
  auto string_arg = [&]() {
    if (e.items.size() != 2 || !e.items[1].quoted)
      fail("(" + head + " ...) takes one string");
    return e.items[1].atom;
  };
  if (head == "str") {
    p.type = PatternType::Str;
    p.text = string_arg();
    return p;
  }
  if (head == "val") {
    p.type = PatternType::Val;
    p.text = string_arg();
    return p;
  }
  if (head == "nostr") {
    if (e.items.size() != 1)
      return fail("(nostr) takes no arguments");
    p.type = PatternType::NoStr;
    return p;
  }
  int index = 0;
  if (template_atom(head, "nt", &index)) {
    check_index(index);
    p.type = PatternType::NonTerminalTpl;
    p.index = index;
  } else {
    p.type = PatternType::NonTerminal;
    const auto dot = head.find('.');
    if (dot == 0 || head.empty())
      return fail("bad node symbol '" + head + "'");
    if (dot != std::string::npos) {
      p.lang = head.substr(0, dot);
      p.symbol = head.substr(dot + 1);
    } else {
      p.symbol = head;
    }
    if (p.symbol.empty())
      return fail("bad node symbol '" + head + "'");
  }
  bool seen_sequence = false;
  for (std::size_t i = 1; i < e.items.size(); ++i) {
    p.children.push_back(to_pattern(e.items[i], matcher));
    if (p.children.back().type == PatternType::Sequence && matcher) {
      if (seen_sequence)
        return fail("more than one '*' in one child list");
      seen_sequence = true;
    }
  }
  return p;
}

std::vector<Pattern>
fragment(const SExpr& e, bool matcher)
{
  if (!e.list || e.items.size() < 2 || e.items[0].list ||
      e.items[0].atom != "fragment")
    throw DslSyntaxError("expected (fragment ...)", e.line);
  std::vector<Pattern> out;
  for (std::size_t i = 1; i < e.items.size(); ++i)
    out.push_back(to_pattern(e.items[i], matcher));
  return out;
}

Rule
rule_from(const SExpr& e, Provenance provenance, int order)
{
  if (!e.list || e.items.size() != 3 || e.items[0].list ||
      e.items[0].atom != "MatchExpand")
    throw DslSyntaxError("expected (MatchExpand (fragment ...) (fragment ...))",
                         e.line);
  try {
    return make_rule(fragment(e.items[1], true), fragment(e.items[2], false),
                     provenance, order);
  } catch (const DslSyntaxError&) {
    throw;
  } catch (const DanglingReference& err) {
    throw DanglingReference("line " + std::to_string(e.line) + ": " + err.what());
  } catch (const DanglingTemplateIndex& err) {
    throw DanglingTemplateIndex("line " + std::to_string(e.line) + ": " +
                                err.what());
  }
}

// ---- numbering and validation ----------------------------------------------

void
number_matchers(Pattern& p, int& captures, int& templates,
                std::vector<PatternType>& template_types)
{
  if (p.is_capture())
    p.index = ++captures;
  else if (p.is_template()) {
    p.index = ++templates;
    template_types.push_back(p.type);
  }
  for (auto& c : p.children)
    number_matchers(c, captures, templates, template_types);
}

void
check_expander(const Pattern& p, int captures,
               const std::vector<PatternType>& template_types)
{
  if (p.is_capture() && (p.index < 1 || p.index > captures))
    throw DanglingReference("reference " + std::to_string(p.index) +
                            " has no capture (" + std::to_string(captures) +
                            " captures)");
  if (p.is_template()) {
    if (p.index < 1 || p.index > static_cast<int>(template_types.size()))
      throw DanglingTemplateIndex("template index " + std::to_string(p.index) +
                                  " has no template matcher");
    const auto bound = template_types[p.index - 1];
    const bool want_kind = p.type == PatternType::NonTerminalTpl;
    if (want_kind != (bound == PatternType::NonTerminalTpl))
      throw DanglingTemplateIndex("template index " + std::to_string(p.index) +
                                  " binds a different kind of template");
  }
  for (const auto& c : p.children)
    check_expander(c, captures, template_types);
}

// ---- writing ---------------------------------------------------------------

void
write_string(std::string& out, const std::string& s)
{
  out += '"';
  for (char c : s) {
    if (c == '"' || c == '\\')
      out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  out += '"';
}

void
write_pattern(std::string& out, const Pattern& p, bool matcher)
{
  const std::string idx = matcher ? "" : std::to_string(p.index);
  switch (p.type) {
    case PatternType::NonTerminal:
    case PatternType::NonTerminalTpl:
      out += '(';
      if (p.type == PatternType::NonTerminalTpl)
        out += "_nt" + idx + "_";
      else
        out += p.lang.empty() ? p.symbol : p.lang + "." + p.symbol;
      for (const auto& c : p.children) {
        out += ' ';
        write_pattern(out, c, matcher);
      }
      out += ')';
      return;
    case PatternType::Str:
      out += "(str ";
      write_string(out, p.text);
      out += ')';
      return;
    case PatternType::Val:
      out += "(val ";
      write_string(out, p.text);
      out += ')';
      return;
    case PatternType::NoStr:
      out += "(nostr)";
      return;
    case PatternType::StrTpl:
      out += "_str" + idx + "_";
      return;
    case PatternType::ValTpl:
      out += "_val" + idx + "_";
      return;
    case PatternType::Single:
      out += "." + idx;
      return;
    case PatternType::Sequence:
      out += "*" + idx;
      return;
  }
}

std::string
hash_hex(std::string_view s)
{
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

// ---- matching --------------------------------------------------------------

std::string_view
trim_quotes(std::string_view s)
{
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') &&
      s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

bool match_node(const Pattern& p, const AstNode& n, Bindings& b);

bool
match_text(const Pattern& p, const std::optional<std::string>& text, Bindings& b)
{
  switch (p.type) {
    case PatternType::Str:
      return text && *text == p.text;
    case PatternType::Val:
      return text && trim_quotes(*text) == trim_quotes(p.text);
    case PatternType::NoStr:
      return !text;
    case PatternType::StrTpl:
    case PatternType::ValTpl:
      if (!text)
        return false;
      b.templates[p.index - 1] = {text, p.type};
      return true;
    default:
      return false;
  }
}

bool
match_list(const std::vector<Pattern>& ps, std::size_t pi,
           const std::vector<AstPtr>& nodes, std::size_t ni, Bindings& b)
{
  if (pi == ps.size())
    return ni == nodes.size();
  const Pattern& p = ps[pi];
  if (p.type == PatternType::Sequence) {
    for (std::size_t k = 0; ni + k <= nodes.size(); ++k) {
      if (match_list(ps, pi + 1, nodes, ni + k, b)) {
        Capture& c = b.captures[p.index - 1];
        c.sequence = true;
        c.nodes.assign(nodes.begin() + ni, nodes.begin() + ni + k);
        return true;
      }
    }
    return false;
  }
  return ni < nodes.size() && match_node(p, *nodes[ni], b) &&
         match_list(ps, pi + 1, nodes, ni + 1, b);
}

bool
match_children(const Pattern& p, const AstNode& n, Bindings& b)
{
  if (n.terminal) {
    if (p.children.empty())
      return true;
    return p.children.size() == 1 && p.children[0].is_terminal_pattern() &&
           match_text(p.children[0], n.text, b);
  }
  return match_list(p.children, 0, n.children, 0, b);
}

bool
match_node(const Pattern& p, const AstNode& n, Bindings& b)
{
  switch (p.type) {
    case PatternType::NonTerminal:
      return n.kind == p.symbol && match_children(p, n, b);
    case PatternType::NonTerminalTpl:
      if (!match_children(p, n, b))
        return false;
      b.templates[p.index - 1] = {n.kind, p.type};
      return true;
    case PatternType::Single:
      // The owning pointer is stored afterwards by collect_singles.
      return true;
    case PatternType::Sequence:
      return false;
    default:
      return n.terminal && match_text(p, n.text, b);
  }
}

// match_node works on references; this second walk over the matched shape
// stores the shared pointers of `.` captures.
void
collect_singles(const Pattern& p, const AstPtr& n, Bindings& b);

void
collect_list(const std::vector<Pattern>& ps, const std::vector<AstPtr>& nodes,
             Bindings& b)
{
  std::size_t ni = 0;
  for (const auto& p : ps) {
    if (p.type == PatternType::Sequence) {
      ni += b.captures[p.index - 1].nodes.size();
      continue;
    }
    collect_singles(p, nodes[ni], b);
    ++ni;
  }
}

void
collect_singles(const Pattern& p, const AstPtr& n, Bindings& b)
{
  if (p.type == PatternType::Single) {
    b.captures[p.index - 1].nodes = {n};
    return;
  }
  if ((p.type == PatternType::NonTerminal ||
       p.type == PatternType::NonTerminalTpl) &&
      !n->terminal)
    collect_list(p.children, n->children, b);
}

// ---- expansion -------------------------------------------------------------

std::optional<std::string>
expanded_text(const Pattern& p, const Bindings& b)
{
  switch (p.type) {
    case PatternType::Str:
    case PatternType::Val:
      return p.text;
    case PatternType::StrTpl:
    case PatternType::ValTpl:
      return b.templates[p.index - 1].value;
    default:
      return std::nullopt;
  }
}

TargetPtr
terminal(std::string kind, std::optional<std::string> text)
{
  auto t = std::make_shared<TargetNode>();
  t->kind = std::move(kind);
  t->text = std::move(text);
  t->terminal = true;
  return t;
}

void
expand_into(const Pattern& p, const Bindings& b, const GrammarDef* target,
            PartialTargetAst& out_ast, std::vector<TargetPtr>& out)
{
  switch (p.type) {
    case PatternType::NonTerminal:
    case PatternType::NonTerminalTpl: {
      std::string kind = p.type == PatternType::NonTerminal
                           ? p.symbol
                           : b.templates[p.index - 1].value.value_or("");
      bool as_terminal = false;
      const Production* prod = target ? target->find(kind) : nullptr;
      if (prod)
        as_terminal = prod->shape == NodeShape::Token;
      else
        as_terminal = p.children.size() == 1 && p.children[0].is_terminal_pattern();
      if (as_terminal) {
        std::optional<std::string> text;
        if (p.children.size() == 1)
          text = expanded_text(p.children[0], b);
        else if (prod && p.children.empty())
          if (const auto* lit = single_literal(*prod))
            text = *lit;
        out.push_back(terminal(std::move(kind), std::move(text)));
        return;
      }
      auto node = std::make_shared<TargetNode>();
      node->kind = std::move(kind);
      for (const auto& c : p.children)
        expand_into(c, b, target, out_ast, node->children);
      out.push_back(std::move(node));
      return;
    }
    case PatternType::Str:
    case PatternType::Val:
    case PatternType::StrTpl:
    case PatternType::ValTpl: {
      auto text = expanded_text(p, b);
      out.push_back(terminal(text.value_or(""), text));
      return;
    }
    case PatternType::NoStr:
      out.push_back(terminal("", std::nullopt));
      return;
    case PatternType::Single:
    case PatternType::Sequence:
      for (const auto& n : b.captures[p.index - 1].nodes) {
        if (p.type == PatternType::Sequence && n->anonymous()) {
          out.push_back(terminal(n->kind, n->text));
          continue;
        }
        auto slot = std::make_shared<TargetNode>();
        slot->slot = static_cast<int>(out_ast.slot_sources.size());
        out_ast.slot_sources.push_back(n);
        out.push_back(std::move(slot));
      }
      return;
  }
}

int
count_concrete(const Pattern& p)
{
  int n = 0;
  switch (p.type) {
    case PatternType::NonTerminal:
    case PatternType::Str:
    case PatternType::Val:
    case PatternType::NoStr:
      n = 1;
      break;
    default:
      break;
  }
  for (const auto& c : p.children)
    n += count_concrete(c);
  return n;
}

} // namespace

Rule
make_rule(std::vector<Pattern> src,
          std::vector<Pattern> trg,
          Provenance provenance,
          int source_order)
{
  if (src.size() != 1 || (src[0].type != PatternType::NonTerminal &&
                          src[0].type != PatternType::NonTerminalTpl))
    throw DslSyntaxError("source pattern must be a single non-terminal matcher",
                         0);
  if (trg.empty())
    throw DslSyntaxError("empty target pattern", 0);
  Rule r;
  std::vector<PatternType> template_types;
  for (auto& p : src)
    number_matchers(p, r.capture_count, r.template_count, template_types);
  for (const auto& p : trg)
    check_expander(p, r.capture_count, template_types);
  r.src = std::move(src);
  r.trg = std::move(trg);
  r.provenance = provenance;
  r.source_order = source_order;
  r.id = hash_hex(serialize_rule(r));
  return r;
}

Rule
parse_rule(std::string_view text)
{
  auto forms = Reader(text).read_all();
  if (forms.size() != 1)
    throw DslSyntaxError("expected exactly one rule", 1);
  return rule_from(forms[0].expr, forms[0].provenance, 0);
}

Ruleset
parse_ruleset(std::string_view text, std::string name)
{
  Ruleset rs;
  rs.name = std::move(name);
  std::set<std::string> ids;
  for (const auto& f : Reader(text).read_all()) {
    auto r = rule_from(f.expr, f.provenance, static_cast<int>(rs.rules.size()));
    if (!ids.insert(r.id).second)
      throw DuplicateRule("line " + std::to_string(f.expr.line) +
                          ": duplicate rule " + r.id);
    rs.rules.push_back(std::move(r));
  }
  return rs;
}

Ruleset
load_ruleset_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open ruleset '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  auto slash = path.find_last_of('/');
  return parse_ruleset(ss.str(),
                       slash == std::string::npos ? path : path.substr(slash + 1));
}

std::string
serialize_rule(const Rule& rule)
{
  std::string out = "(MatchExpand (fragment";
  for (const auto& p : rule.src) {
    out += ' ';
    write_pattern(out, p, true);
  }
  out += ") (fragment";
  for (const auto& p : rule.trg) {
    out += ' ';
    write_pattern(out, p, false);
  }
  out += "))";
  return out;
}

std::string
serialize_ruleset(const Ruleset& rules)
{
  std::string out;
  for (const auto& r : rules.rules) {
    if (!out.empty())
      out += '\n';
    if (r.provenance != Provenance::Base)
      out += "# @" + std::string(to_string(r.provenance)) + "\n";
    out += serialize_rule(r);
    out += '\n';
  }
  return out;
}

void
append_rules(Ruleset& into, const Ruleset& more)
{
  for (const auto& r : more.rules) {
    if (into.find(r.id))
      continue;
    Rule copy = r;
    copy.source_order = static_cast<int>(into.rules.size());
    into.rules.push_back(std::move(copy));
  }
}

std::optional<Bindings>
match_rule(const Rule& rule, const AstNode& node)
{
  Bindings b;
  b.captures.resize(rule.capture_count);
  b.templates.resize(rule.template_count);
  if (!match_node(rule.src[0], node, b))
    return std::nullopt;
  // The root itself is never a capture (make_rule guarantees that), so the
  // owning pointers of every `.` capture live in the children lists.
  if (!node.terminal)
    collect_list(rule.src[0].children, node.children, b);
  return b;
}

PartialTargetAst
expand_rule(const Rule& rule, const Bindings& bindings, const GrammarDef* target)
{
  PartialTargetAst out;
  for (const auto& p : rule.trg)
    expand_into(p, bindings, target, out, out.roots);
  return out;
}

int
concrete_matchers(const Rule& rule)
{
  int n = 0;
  for (const auto& p : rule.src)
    n += count_concrete(p);
  return n;
}

SpecificityKey
specificity(const Rule& rule)
{
  return {-concrete_matchers(rule), rule.capture_count + rule.template_count,
          rule.source_order};
}

} // namespace xlate
