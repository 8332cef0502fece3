#include "xlate/transducer.hpp"

#include <algorithm>
#include <atomic>

namespace xlate {

namespace {

std::atomic<int> next_slot_id{0};

void
fragment_events(const TargetNode& n, const std::vector<int>& slot_map,
                std::vector<PdaEvent>& out)
{
  if (n.slot >= 0) {
    out.push_back(PdaEvent::slot(slot_map[static_cast<std::size_t>(n.slot)]));
    return;
  }
  if (n.terminal) {
    out.push_back(PdaEvent::from({TokenKind::Token, n.kind, n.text, -1}));
    return;
  }
  out.push_back(PdaEvent::from({TokenKind::EnterNode, n.kind, std::nullopt, -1}));
  for (const auto& c : n.children)
    fragment_events(*c, slot_map, out);
  out.push_back(PdaEvent::from({TokenKind::ExitNode, n.kind, std::nullopt, -1}));
}

std::string
describe(const AstNode& n)
{
  std::string s = "no rule applies to " + (n.kind.empty() ? std::string("fragment") : n.kind);
  if (n.span)
    s += " at offset " + std::to_string(n.span->start);
  return s;
}

SlotLocator
locator_of(const SlotNode& s)
{
  return {s.source->span.value_or(Span{}), s.source->kind, 0};
}

} // namespace

DerivationTree::DerivationTree(AstPtr source, const GrammarDef* target)
  : target_(target)
{
  root_ = new_slot(std::move(source), -1);
}

int
DerivationTree::new_slot(AstPtr source, int parent)
{
  const int id = next_slot_id.fetch_add(1);
  slots_.emplace(id, SlotNode{id, std::move(source), parent});
  return id;
}

const std::vector<TransductionNode>&
DerivationTree::expand_slot(int slot_id, const Ruleset& rules)
{
  if (ruleset_ && (ruleset_ != &rules || ruleset_size_ != rules.rules.size()))
    throw std::invalid_argument("derivation tree was expanded with a different ruleset");
  ruleset_ = &rules;
  ruleset_size_ = rules.rules.size();
  if (auto it = cache_.find(slot_id); it != cache_.end())
    return it->second;

  const AstPtr source = slots_.at(slot_id).source;
  std::vector<const Rule*> order;
  order.reserve(rules.rules.size());
  for (const auto& r : rules.rules)
    order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const Rule* a, const Rule* b) {
    return specificity(*a) < specificity(*b);
  });

  std::vector<TransductionNode> alts;
  for (const Rule* r : order) {
    auto b = match_rule(*r, *source);
    if (!b)
      continue;
    TransductionNode t;
    t.rule = r;
    t.rule_id = r->id;
    t.fragment = expand_rule(*r, *b, target_);
    t.bindings = std::move(*b);
    std::unordered_map<const AstNode*, int> seen;
    for (const auto& s : t.fragment.slot_sources) {
      auto [it, fresh] = seen.emplace(s.get(), static_cast<int>(t.child_slots.size()));
      if (fresh)
        t.child_slots.push_back(new_slot(s, slot_id));
      t.slot_map.push_back(it->second);
    }
    for (const auto& root : t.fragment.roots)
      fragment_events(*root, t.slot_map, t.events);
    alts.push_back(std::move(t));
  }
  return cache_.emplace(slot_id, std::move(alts)).first->second;
}

DerivationTree
init_derivation(AstPtr source, const GrammarDef* target)
{
  return DerivationTree(std::move(source), target);
}

Stuck::Stuck(int slot_id, AstPtr source, PartialTargetAst partial, DerivationPath path)
  : std::runtime_error(describe(*source))
  , slot_id(slot_id)
  , source(source)
  , span(source->span.value_or(Span{}))
  , partial(std::move(partial))
  , path(std::move(path))
{
}

std::size_t
first_choice(const SlotNode&, const std::vector<TransductionNode>&)
{
  return 0;
}

namespace {

const TransductionNode*
chosen(DerivationTree& tree, const Ruleset& rules, int slot, const std::string& rule_id)
{
  for (const auto& t : tree.expand_slot(slot, rules)) {
    if (t.rule_id == rule_id)
      return &t;
  }
  return nullptr;
}

struct Assembler
{
  DerivationTree& tree;
  const Ruleset& rules;
  std::unordered_map<int, std::string> choice;
  PartialTargetAst out;

  void slot(int id, std::vector<TargetPtr>& into)
  {
    auto it = choice.find(id);
    const TransductionNode* t =
      it == choice.end() ? nullptr : chosen(tree, rules, id, it->second);
    if (!t) {
      auto pending = std::make_shared<TargetNode>();
      pending->slot = static_cast<int>(out.slot_sources.size());
      out.slot_sources.push_back(tree.slot(id).source);
      into.push_back(std::move(pending));
      return;
    }
    for (const auto& r : t->fragment.roots)
      copy(*t, r, into);
  }

  void copy(const TransductionNode& t, const TargetPtr& n, std::vector<TargetPtr>& into)
  {
    if (n->slot >= 0) {
      const auto k = static_cast<std::size_t>(t.slot_map[static_cast<std::size_t>(n->slot)]);
      slot(t.child_slots[k], into);
      return;
    }
    if (n->terminal) {
      into.push_back(n);
      return;
    }
    auto node = std::make_shared<TargetNode>();
    node->kind = n->kind;
    for (const auto& c : n->children)
      copy(t, c, node->children);
    into.push_back(std::move(node));
  }
};

} // namespace

PartialTargetAst
assemble(DerivationTree& tree, const Ruleset& rules, const DerivationPath& path)
{
  Assembler a{tree, rules, {}, {}};
  for (const auto& c : path.choices)
    a.choice.emplace(c.slot_id, c.rule_id);
  a.slot(tree.root().slot_id, a.out.roots);
  return std::move(a.out);
}

Derivation
derive(DerivationTree& tree, const Ruleset& rules, const ChoicePolicy& policy)
{
  DerivationPath path;
  std::vector<int> pending{tree.root().slot_id};
  while (!pending.empty()) {
    const int id = pending.back();
    pending.pop_back();
    const auto& alts = tree.expand_slot(id, rules);
    if (alts.empty())
      throw Stuck(id, tree.slot(id).source, assemble(tree, rules, path), path);
    const std::size_t pick = policy(tree.slot(id), alts);
    const auto& t = alts.at(pick);
    path.choices.push_back({id, t.rule_id});
    for (auto it = t.child_slots.rbegin(); it != t.child_slots.rend(); ++it)
      pending.push_back(*it);
  }
  return {assemble(tree, rules, path), std::move(path)};
}

std::vector<SlotLocator>
locate(const DerivationTree& tree, const DerivationPath& path)
{
  std::vector<SlotLocator> out;
  out.reserve(path.choices.size());
  for (const auto& c : path.choices) {
    SlotLocator l = locator_of(tree.slot(c.slot_id));
    for (const auto& prev : out) {
      if (prev.span == l.span && prev.kind == l.kind)
        ++l.occurrence;
    }
    out.push_back(std::move(l));
  }
  return out;
}

namespace {

struct Frame;
using FramePtr = std::shared_ptr<const Frame>;

// Remaining events of a fragment whose leftmost slots are done.
struct Frame
{
  const TransductionNode* node = nullptr;
  std::size_t pos = 0;
  int step = 0;
  FramePtr next;
};

class Engine
{
public:
  Engine(DerivationTree& tree, const Ruleset& rules, const SearchRequest& req)
    : tree_(tree)
    , rules_(rules)
    , req_(req)
    , tight_(req.after.has_value())
  {
  }

  SearchResult run()
  {
    std::vector<PdaConfig> configs;
    if (req_.pda)
      configs.push_back(req_.pda->initial());
    if (slot(tree_.root().slot_id, nullptr, configs))
      result_.path = DerivationPath{path_};
    return std::move(result_);
  }

private:
  std::vector<std::size_t> candidates(int id, const std::vector<TransductionNode>& alts,
                                      const SlotLocator* here)
  {
    const std::size_t i = path_.size();
    std::vector<std::size_t> order;
    auto excluded = req_.exclude.find(id);
    for (std::size_t k = 0; k < alts.size(); ++k) {
      if (i < req_.frozen.size() &&
          (req_.frozen[i].slot_id != id || req_.frozen[i].rule_id != alts[k].rule_id))
        continue;
      if (excluded != req_.exclude.end() && excluded->second.count(alts[k].rule_id))
        continue;
      order.push_back(k);
    }
    if (here) {
      for (const auto& o : req_.overrides) {
        if (!(o.slot == *here))
          continue;
        auto hit = std::find_if(order.begin(), order.end(), [&](std::size_t k) {
          return alts[k].rule_id == o.rule_id;
        });
        if (hit != order.end())
          order = {*hit};
      }
    }
    return order;
  }

  // Index of the `after` choice at the current position, if still tight.
  std::optional<std::size_t> floor_index(int id, const std::vector<TransductionNode>& alts)
  {
    if (!tight_)
      return std::nullopt;
    const auto& prev = req_.after->choices;
    const std::size_t i = path_.size();
    if (i >= prev.size() || prev[i].slot_id != id) {
      tight_ = false;
      return std::nullopt;
    }
    for (std::size_t k = 0; k < alts.size(); ++k) {
      if (alts[k].rule_id == prev[i].rule_id)
        return k;
    }
    tight_ = false;
    return std::nullopt;
  }

  bool slot(int id, FramePtr cont, const std::vector<PdaConfig>& configs)
  {
    const auto& alts = tree_.expand_slot(id, rules_);
    if (alts.empty()) {
      if (!result_.stuck_slot)
        result_.stuck_slot = id;
      aborted_ = req_.stop_when_stuck;
      return false;
    }
    const bool was_tight = tight_;
    const auto floor = floor_index(id, alts);
    if (!req_.overrides.empty()) {
      SlotLocator l = locator_of(tree_.slot(id));
      for (const auto& prev : locators_) {
        if (prev.span == l.span && prev.kind == l.kind)
          ++l.occurrence;
      }
      locators_.push_back(l);
    }
    const auto order =
      candidates(id, alts, req_.overrides.empty() ? nullptr : &locators_.back());
    bool found = false;
    for (std::size_t k : order) {
      if (floor && k < *floor)
        continue;
      if (result_.branches >= req_.budget) {
        result_.budget_exhausted = true;
        break;
      }
      ++result_.branches;
      tight_ = floor.has_value() && k == *floor;
      const int step = static_cast<int>(path_.size());
      path_.push_back({id, alts[k].rule_id});
      done_[id] = {&alts[k], step};
      auto frame = std::make_shared<Frame>(Frame{&alts[k], 0, step, cont});
      if (resume(frame, configs)) {
        found = true;
        break;
      }
      path_.pop_back();
      done_.erase(id);
      if (aborted_)
        break;
    }
    if (!found) {
      tight_ = was_tight;
      if (!req_.overrides.empty())
        locators_.pop_back();
    }
    return found;
  }

  // Events of an already derived slot, for a capture referenced again.
  void replay(int id, std::vector<PdaEvent>& out) const
  {
    const auto& [node, step] = done_.at(id);
    for (const auto& ev : node->events) {
      if (ev.type == EventType::Slot) {
        replay(node->child_slots[static_cast<std::size_t>(ev.slot_id)], out);
        continue;
      }
      out.push_back(ev);
      out.back().tag = step;
    }
  }

  bool resume(FramePtr stack, std::vector<PdaConfig> configs)
  {
    std::vector<PdaEvent> batch;
    while (stack) {
      const auto& events = stack->node->events;
      std::size_t k = stack->pos;
      int child = -1;
      batch.clear();
      for (; k < events.size(); ++k) {
        if (events[k].type != EventType::Slot) {
          batch.push_back(events[k]);
          batch.back().tag = stack->step;
          continue;
        }
        const int id = stack->node->child_slots[static_cast<std::size_t>(events[k].slot_id)];
        if (!done_.count(id)) {
          child = id;
          break;
        }
        replay(id, batch);
      }
      if (req_.pda && !batch.empty()) {
        auto v = req_.pda->feed(configs, batch);
        if (v.rejected)
          return false;
        configs = std::move(v.configs);
      }
      if (child >= 0) {
        auto cont = std::make_shared<Frame>(Frame{stack->node, k + 1, stack->step, stack->next});
        return slot(child, std::move(cont), configs);
      }
      stack = stack->next;
    }
    if (tight_)
      return false;
    if (req_.pda) {
      auto v = req_.pda->feed(configs, {PdaEvent::end()});
      if (v.rejected)
        return false;
      auto acc = std::find_if(v.configs.begin(), v.configs.end(), [](const PdaConfig& c) {
        return c.state == PdaState::Accept;
      });
      if (acc == v.configs.end())
        return false;
      result_.target = reconstruct_parse_tree(*acc);
    } else {
      result_.target = to_ast(assemble(tree_, rules_, DerivationPath{path_}));
    }
    return true;
  }

  DerivationTree& tree_;
  const Ruleset& rules_;
  const SearchRequest& req_;
  bool tight_;
  bool aborted_ = false;
  std::vector<Choice> path_;
  std::vector<SlotLocator> locators_;
  std::unordered_map<int, std::pair<const TransductionNode*, int>> done_;
  SearchResult result_;
};

} // namespace

SearchResult
search(DerivationTree& tree, const Ruleset& rules, const SearchRequest& request)
{
  return Engine(tree, rules, request).run();
}

std::optional<DerivationPath>
next_path(DerivationTree& tree, const Ruleset& rules, const DerivationPath& previous,
          const PivotConstraints& constraints)
{
  SearchRequest req;
  req.budget = 1'000'000;
  req.exclude = constraints;
  std::size_t pivot = previous.choices.size();
  bool violates = false;
  for (std::size_t i = 0; i < previous.choices.size(); ++i) {
    auto it = constraints.find(previous.choices[i].slot_id);
    if (it == constraints.end())
      continue;
    pivot = std::min(pivot, i);
    violates = violates || it->second.count(previous.choices[i].rule_id) != 0;
  }
  if (pivot == previous.choices.size())
    pivot = 0;
  req.frozen.assign(previous.choices.begin(),
                    previous.choices.begin() + static_cast<std::ptrdiff_t>(pivot));
  if (!violates)
    req.after = previous;
  return search(tree, rules, req).path;
}

namespace {

AstPtr
convert(const TargetNode& n)
{
  if (n.slot >= 0)
    throw std::logic_error("target still has pending slots");
  if (n.terminal)
    return AstNode::make_terminal(n.kind, n.text);
  std::vector<AstPtr> kids;
  kids.reserve(n.children.size());
  for (const auto& c : n.children)
    kids.push_back(convert(*c));
  return AstNode::make_node(n.kind, std::move(kids));
}

} // namespace

AstPtr
to_ast(const PartialTargetAst& ast)
{
  if (ast.roots.size() == 1)
    return convert(*ast.roots[0]);
  std::vector<AstPtr> kids;
  for (const auto& r : ast.roots)
    kids.push_back(convert(*r));
  return AstNode::make_node("", std::move(kids));
}

} // namespace xlate
