#include "xlate/parser.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <unordered_map>
#include <vector>

namespace xlate {

namespace {

bool
word_char(char c)
{
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// Text as seen by the parser plus a map back to original byte offsets.
struct Prepared
{
  std::string text;
  /// origin[i] is the original offset of text[i]; one extra entry for the end.
  std::vector<std::size_t> origin;

  void put(char c, std::size_t at)
  {
    text.push_back(c);
    origin.push_back(at);
  }
};

Prepared
prepare_freeform(std::string_view text)
{
  Prepared p;
  p.text.assign(text);
  p.origin.resize(text.size() + 1);
  for (std::size_t i = 0; i <= text.size(); ++i)
    p.origin[i] = i;
  return p;
}

// Turns indentation into layout marks. Blank and comment-only lines vanish,
// newlines inside brackets become spaces, and comments are dropped.
Prepared
prepare_indented(std::string_view text, std::string_view comment)
{
  Prepared p;
  std::vector<std::size_t> indents{0};
  int depth = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();

  while (i < n) {
    const std::size_t line_start = i;
    std::size_t width = 0;
    while (i < n && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r')) {
      if (text[i] == ' ')
        ++width;
      else if (text[i] == '\t')
        width = (width / 8 + 1) * 8;
      ++i;
    }
    const bool blank = i >= n || text[i] == '\n' ||
                       (!comment.empty() && text.substr(i, comment.size()) == comment);
    if (blank && depth == 0) {
      while (i < n && text[i] != '\n')
        ++i;
      if (i < n)
        ++i;
      continue;
    }

    if (depth == 0) {
      if (width > indents.back()) {
        indents.push_back(width);
        p.put(kIndentMark, i);
      } else {
        while (width < indents.back()) {
          indents.pop_back();
          p.put(kDedentMark, i);
        }
        if (width != indents.back())
          throw ParseError("inconsistent indentation", line_start);
      }
    } else {
      p.put(' ', line_start);
    }

    char quote = 0;
    while (i < n && (text[i] != '\n' || quote)) {
      const char c = text[i];
      if (quote) {
        if (c == '\n')
          throw ParseError("unterminated string literal", i);
        p.put(c, i);
        if (c == '\\' && i + 1 < n && text[i + 1] != '\n') {
          p.put(text[i + 1], i + 1);
          i += 2;
          continue;
        }
        if (c == quote)
          quote = 0;
        ++i;
        continue;
      }
      if (!comment.empty() && text.substr(i, comment.size()) == comment) {
        while (i < n && text[i] != '\n')
          ++i;
        break;
      }
      if (c == '"' || c == '\'')
        quote = c;
      else if (c == '(' || c == '[' || c == '{')
        ++depth;
      else if ((c == ')' || c == ']' || c == '}') && depth > 0)
        --depth;
      p.put(c, i);
      ++i;
    }
    if (depth == 0)
      p.put(kNewlineMark, i);
    if (i < n)
      ++i;
  }
  while (indents.size() > 1) {
    indents.pop_back();
    p.put(kDedentMark, n);
  }
  p.origin.push_back(n);
  return p;
}

struct MemoEntry
{
  bool ok = false;
  std::size_t end = 0;
  std::vector<AstPtr> nodes;
};

class Parser
{
public:
  Parser(const GrammarDef& g, Prepared input)
    : g_(g)
    , in_(std::move(input))
  {
  }

  AstPtr run(int start)
  {
    std::vector<AstPtr> out;
    auto end = ref(start, 0, out);
    if (end) {
      std::size_t pos = skip(*end);
      // A fragment parsed from an inner production may leave the layout
      // marks that close its last line.
      if (start != g_.start_index()) {
        while (pos < in_.text.size() && (in_.text[pos] == kNewlineMark ||
                                         in_.text[pos] == kDedentMark))
          pos = skip(pos + 1);
      }
      if (pos == in_.text.size()) {
        if (out.size() == 1)
          return out[0];
        auto root = AstNode::make_node(g_.at(start).name, out, span(0, pos));
        return root;
      }
      note_failure(pos);
    }
    const std::size_t at = std::min(furthest_, in_.text.size());
    throw ParseError(message(at), in_.origin[at]);
  }

private:
  std::string message(std::size_t at) const
  {
    std::string m = "syntax error";
    if (at >= in_.text.size())
      return m + " at end of input";
    std::string near;
    for (std::size_t i = at; i < in_.text.size() && near.size() < 12; ++i) {
      const char c = in_.text[i];
      if (c == kNewlineMark || c == kIndentMark || c == kDedentMark)
        break;
      near.push_back(c);
    }
    return m + " near '" + near + "'";
  }

  Span span(std::size_t from, std::size_t to) const
  {
    if (to <= from)
      return {in_.origin[from], in_.origin[from]};
    return {in_.origin[from], in_.origin[to - 1] + 1};
  }

  void note_failure(std::size_t pos) { furthest_ = std::max(furthest_, pos); }

  std::size_t skip(std::size_t pos) const
  {
    const auto& t = in_.text;
    const bool freeform = g_.layout_policy == LayoutPolicy::Freeform;
    const auto& lc = g_.line_comment;
    while (pos < t.size()) {
      const char c = t[pos];
      if (c == ' ' || c == '\t' || c == '\r' || (freeform && c == '\n')) {
        ++pos;
        continue;
      }
      if (freeform && !lc.empty() && t.compare(pos, lc.size(), lc) == 0) {
        while (pos < t.size() && t[pos] != '\n')
          ++pos;
        continue;
      }
      break;
    }
    return pos;
  }

  std::optional<std::size_t> literal(const std::string& lit, std::size_t pos)
  {
    pos = skip(pos);
    const auto& t = in_.text;
    if (is_layout_literal(lit)) {
      if (pos < t.size() && t[pos] == layout_mark(lit))
        return pos + 1;
      note_failure(pos);
      return std::nullopt;
    }
    if (t.compare(pos, lit.size(), lit) != 0) {
      note_failure(pos);
      return std::nullopt;
    }
    const std::size_t end = pos + lit.size();
    if (g_.word_tokens.count(lit) && end < t.size() && word_char(t[end])) {
      note_failure(pos);
      return std::nullopt;
    }
    auto longer = g_.longer_literals.find(lit);
    if (longer != g_.longer_literals.end()) {
      for (const auto& l : longer->second) {
        if (t.compare(pos, l.size(), l) == 0) {
          note_failure(pos);
          return std::nullopt;
        }
      }
    }
    return end;
  }

  std::optional<std::size_t> pattern(const PegExpr& e, std::size_t pos)
  {
    pos = skip(pos);
    const char* b = in_.text.data() + pos;
    const char* end = in_.text.data() + in_.text.size();
    std::cmatch m;
    if (pos < in_.text.size() &&
        std::regex_search(b, end, m, *e.regex,
                          std::regex_constants::match_continuous) &&
        m.length(0) > 0)
      return pos + static_cast<std::size_t>(m.length(0));
    note_failure(pos);
    return std::nullopt;
  }

  // Matches a token body without building nodes; returns the match end.
  std::optional<std::size_t> raw(const PegExpr& e, std::size_t pos)
  {
    switch (e.type) {
      case ExprType::Literal:
        return literal(e.text, pos);
      case ExprType::Pattern:
        return pattern(e, pos);
      case ExprType::Choice:
        for (const auto& c : e.children) {
          if (auto r = raw(*c, pos))
            return r;
        }
        return std::nullopt;
      default:
        return std::nullopt;
    }
  }

  std::optional<std::size_t> eval(const PegExpr& e,
                                  std::size_t pos,
                                  std::vector<AstPtr>& out)
  {
    const std::size_t mark = out.size();
    switch (e.type) {
      case ExprType::Literal: {
        auto r = literal(e.text, pos);
        if (r && !is_layout_literal(e.text)) {
          const std::size_t start = skip(pos);
          out.push_back(
            AstNode::make_terminal(e.text, e.text, span(start, *r)));
        }
        return r;
      }
      case ExprType::Pattern: {
        auto r = pattern(e, pos);
        if (r) {
          const std::size_t start = skip(pos);
          out.push_back(AstNode::make_terminal(
            e.text, in_.text.substr(start, *r - start), span(start, *r)));
        }
        return r;
      }
      case ExprType::Seq:
        for (const auto& c : e.children) {
          auto r = eval(*c, pos, out);
          if (!r) {
            out.resize(mark);
            return std::nullopt;
          }
          pos = *r;
        }
        return pos;
      case ExprType::Choice:
        for (const auto& c : e.children) {
          if (auto r = eval(*c, pos, out))
            return r;
          out.resize(mark);
        }
        return std::nullopt;
      case ExprType::Repeat0:
      case ExprType::Repeat1: {
        std::size_t count = 0;
        while (true) {
          const std::size_t before = out.size();
          auto r = eval(*e.children[0], pos, out);
          if (!r || *r == pos) {
            out.resize(before);
            break;
          }
          pos = *r;
          ++count;
        }
        if (e.type == ExprType::Repeat1 && count == 0)
          return std::nullopt;
        return pos;
      }
      case ExprType::Optional: {
        if (auto r = eval(*e.children[0], pos, out))
          return r;
        out.resize(mark);
        return pos;
      }
      case ExprType::Ref:
        return ref(e.production, pos, out);
    }
    return std::nullopt;
  }

  std::optional<std::size_t> ref(int prod, std::size_t pos,
                                 std::vector<AstPtr>& out)
  {
    const std::uint64_t key =
      (static_cast<std::uint64_t>(prod) << 40) | static_cast<std::uint64_t>(pos);
    auto it = memo_.find(key);
    if (it == memo_.end()) {
      MemoEntry entry;
      auto r = compute(prod, pos, entry.nodes);
      entry.ok = r.has_value();
      entry.end = r.value_or(0);
      if (!entry.ok)
        entry.nodes.clear();
      it = memo_.emplace(key, std::move(entry)).first;
    }
    if (!it->second.ok)
      return std::nullopt;
    out.insert(out.end(), it->second.nodes.begin(), it->second.nodes.end());
    return it->second.end;
  }

  std::optional<std::size_t> compute(int prod, std::size_t pos,
                                     std::vector<AstPtr>& out)
  {
    const Production& p = g_.at(prod);
    switch (p.shape) {
      case NodeShape::Token: {
        auto r = raw(*p.expr, pos);
        if (!r)
          return std::nullopt;
        const std::size_t start = skip(pos);
        out.push_back(AstNode::make_terminal(
          p.name, in_.text.substr(start, *r - start), span(start, *r)));
        return r;
      }
      case NodeShape::Hidden:
        return eval(*p.expr, pos, out);
      case NodeShape::Node: {
        std::vector<AstPtr> children;
        auto r = eval(*p.expr, pos, children);
        if (!r)
          return std::nullopt;
        const std::size_t start = skip(pos);
        auto sp = children.empty() ? span(start, start) : span(start, *r);
        if (!children.empty())
          sp.start = children.front()->span->start;
        out.push_back(AstNode::make_node(p.name, std::move(children), sp));
        return r;
      }
      case NodeShape::Fold: {
        const auto& head = *p.expr->children[0];
        const auto& tail = *p.expr->children[1]->children[0];
        std::vector<AstPtr> acc;
        auto r = eval(head, pos, acc);
        if (!r)
          return std::nullopt;
        pos = *r;
        while (true) {
          std::vector<AstPtr> more;
          auto t = eval(tail, pos, more);
          if (!t || *t == pos)
            break;
          pos = *t;
          const Production* tp = nullptr;
          if (more.size() == 1 && !more[0]->terminal)
            tp = g_.find(more[0]->kind);
          if (tp && tp->trailer) {
            std::vector<AstPtr> kids = acc;
            kids.insert(kids.end(), more[0]->children.begin(),
                        more[0]->children.end());
            acc = {AstNode::make_node(tp->name, std::move(kids))};
          } else {
            std::vector<AstPtr> kids = acc;
            kids.insert(kids.end(), more.begin(), more.end());
            acc = {AstNode::make_node(p.name, std::move(kids))};
          }
        }
        out.insert(out.end(), acc.begin(), acc.end());
        return pos;
      }
    }
    return std::nullopt;
  }

  const GrammarDef& g_;
  Prepared in_;
  std::unordered_map<std::uint64_t, MemoEntry> memo_;
  std::size_t furthest_ = 0;
};

} // namespace

AstPtr
parse_from(const GrammarDef& grammar,
           std::string_view text,
           std::string_view production)
{
  auto it = grammar.index.find(production);
  if (it == grammar.index.end())
    throw GrammarError("no production named '" + std::string(production) + "'");
  Prepared input = grammar.layout_policy == LayoutPolicy::IndentationSensitive
                     ? prepare_indented(text, grammar.line_comment)
                     : prepare_freeform(text);
  Parser parser(grammar, std::move(input));
  return parser.run(it->second);
}

AstPtr
parse_source(const GrammarDef& grammar, std::string_view text)
{
  return parse_from(grammar, text, grammar.start_symbol);
}

std::size_t
line_of(std::string_view text, std::size_t offset)
{
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(
               std::count(text.begin(), text.begin() + offset, '\n'));
}

} // namespace xlate
