#include "horo/query.hpp"

#include <algorithm>

namespace horo {

QueryAst QueryAst::entity(EntityId e) {
  QueryAst q;
  q.kind = Kind::entity;
  q.id = e;
  return q;
}

QueryAst QueryAst::translate(QueryAst child, RelationId r) {
  QueryAst q;
  q.kind = Kind::translate;
  q.id = r;
  q.children.push_back(std::move(child));
  return q;
}

QueryAst QueryAst::intersect(std::vector<QueryAst> members) {
  if (members.size() < 2) throw DataError("intersect requires arity >= 2");
  QueryAst q;
  q.kind = Kind::intersect;
  q.children = std::move(members);
  return q;
}

QueryAst QueryAst::unite(std::vector<QueryAst> members) {
  if (members.size() < 2) throw DataError("union requires arity >= 2");
  QueryAst q;
  q.kind = Kind::unite;
  q.children = std::move(members);
  return q;
}

bool QueryAst::contains(Kind k) const {
  if (kind == k) return true;
  for (const QueryAst& c : children)
    if (c.contains(k)) return true;
  return false;
}

const char* to_string(StructureTag tag) {
  switch (tag) {
    case StructureTag::t1: return "1t";
    case StructureTag::t2: return "2t";
    case StructureTag::t3: return "3t";
    case StructureTag::i2: return "2i";
    case StructureTag::i3: return "3i";
    case StructureTag::u2: return "2u";
    case StructureTag::ip: return "ip";
    case StructureTag::pi: return "pi";
    case StructureTag::up: return "up";
  }
  return "?";
}

StructureTag structure_tag_from_string(const std::string& s) {
  for (int i = 0; i < kStructureTagCount; ++i) {
    const StructureTag tag = structure_tag_at(i);
    if (s == to_string(tag)) return tag;
  }
  throw UsageError("unknown query structure tag: " + s);
}

StructureTag structure_tag_at(int index) {
  static constexpr StructureTag kOrder[] = {
      StructureTag::t1, StructureTag::t2, StructureTag::t3,
      StructureTag::i2, StructureTag::i3, StructureTag::u2,
      StructureTag::ip, StructureTag::pi, StructureTag::up,
  };
  return kOrder[index];
}

// --- parsing -----------------------------------------------------------------

namespace {

class Parser {
 public:
  Parser(const std::string& text, const Vocab& entities, const Vocab& relations)
      : text_(text), entities_(entities), relations_(relations) {}

  QueryAst parse() {
    QueryAst q = parse_node();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    return q;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("query syntax error at byte " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c)
      fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string identifier() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(' || c == ')' || c == ',' || std::isspace(static_cast<unsigned char>(c))) break;
      ++pos_;
    }
    if (pos_ == start) fail("expected identifier");
    return text_.substr(start, pos_ - start);
  }

  QueryAst parse_node() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char head = text_[pos_];
    ++pos_;
    expect('(');
    switch (head) {
      case 'E': {
        const std::string name = identifier();
        const auto id = entities_.find(name);
        if (!id) fail("unknown entity '" + name + "'");
        expect(')');
        return QueryAst::entity(*id);
      }
      case 'T': {
        QueryAst child = parse_node();
        expect(',');
        const std::string name = identifier();
        const auto id = relations_.find(name);
        if (!id) fail("unknown relation '" + name + "'");
        expect(')');
        return QueryAst::translate(std::move(child), *id);
      }
      case 'I':
      case 'U': {
        std::vector<QueryAst> members;
        members.push_back(parse_node());
        skip_ws();
        while (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
          members.push_back(parse_node());
          skip_ws();
        }
        expect(')');
        if (members.size() < 2)
          fail(std::string(head == 'I' ? "intersection" : "union") + " requires arity >= 2");
        return head == 'I' ? QueryAst::intersect(std::move(members))
                           : QueryAst::unite(std::move(members));
      }
      default:
        --pos_;
        fail(std::string("expected one of E/T/I/U, got '") + head + "'");
    }
  }

  const std::string& text_;
  const Vocab& entities_;
  const Vocab& relations_;
  std::size_t pos_ = 0;
};

}  // namespace

QueryAst parse_query(const std::string& text, const Vocab& entities, const Vocab& relations) {
  return Parser(text, entities, relations).parse();
}

std::string print_query(const QueryAst& q, const Vocab& entities, const Vocab& relations) {
  switch (q.kind) {
    case QueryAst::Kind::entity:
      return "E(" + entities.name(q.id) + ")";
    case QueryAst::Kind::translate:
      return "T(" + print_query(q.children[0], entities, relations) + "," +
             relations.name(q.id) + ")";
    case QueryAst::Kind::intersect:
    case QueryAst::Kind::unite: {
      std::string out(q.kind == QueryAst::Kind::intersect ? "I(" : "U(");
      for (std::size_t i = 0; i < q.children.size(); ++i) {
        if (i) out += ",";
        out += print_query(q.children[i], entities, relations);
      }
      out += ")";
      return out;
    }
  }
  return "";
}

// --- normalization / DNF -----------------------------------------------------

namespace {

// Total structural order used for canonical child sorting.
int compare(const QueryAst& a, const QueryAst& b) {
  if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind) ? -1 : 1;
  if (a.id != b.id) return a.id < b.id ? -1 : 1;
  if (a.children.size() != b.children.size())
    return a.children.size() < b.children.size() ? -1 : 1;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    const int c = compare(a.children[i], b.children[i]);
    if (c != 0) return c;
  }
  return 0;
}

constexpr std::size_t kDnfBranchCap = 64;

std::vector<QueryAst> dnf_branches(const QueryAst& q) {
  switch (q.kind) {
    case QueryAst::Kind::entity:
      return {q};
    case QueryAst::Kind::translate: {
      std::vector<QueryAst> out;
      for (QueryAst& b : dnf_branches(q.children[0]))
        out.push_back(QueryAst::translate(std::move(b), q.id));
      return out;
    }
    case QueryAst::Kind::unite: {
      std::vector<QueryAst> out;
      for (const QueryAst& c : q.children) {
        auto sub = dnf_branches(c);
        out.insert(out.end(), std::make_move_iterator(sub.begin()),
                   std::make_move_iterator(sub.end()));
        if (out.size() > kDnfBranchCap) throw DataError("DNF branch count exceeds 64");
      }
      return out;
    }
    case QueryAst::Kind::intersect: {
      // Cartesian product of child branch sets.
      std::vector<std::vector<QueryAst>> parts;
      std::size_t total = 1;
      for (const QueryAst& c : q.children) {
        parts.push_back(dnf_branches(c));
        total *= parts.back().size();
        if (total > kDnfBranchCap) throw DataError("DNF branch count exceeds 64");
      }
      std::vector<QueryAst> out;
      std::vector<std::size_t> pick(parts.size(), 0);
      for (std::size_t n = 0; n < total; ++n) {
        std::vector<QueryAst> members;
        for (std::size_t i = 0; i < parts.size(); ++i) members.push_back(parts[i][pick[i]]);
        out.push_back(QueryAst::intersect(std::move(members)));
        for (std::size_t i = parts.size(); i-- > 0;) {
          if (++pick[i] < parts[i].size()) break;
          pick[i] = 0;
        }
      }
      return out;
    }
  }
  return {};
}

}  // namespace

QueryAst normalize(const QueryAst& q) {
  QueryAst out = q;
  for (QueryAst& c : out.children) c = normalize(c);
  if (out.kind == QueryAst::Kind::intersect || out.kind == QueryAst::Kind::unite)
    std::sort(out.children.begin(), out.children.end(),
              [](const QueryAst& a, const QueryAst& b) { return compare(a, b) < 0; });
  return out;
}

DnfQuery to_dnf(const QueryAst& q) {
  DnfQuery out;
  for (QueryAst& b : dnf_branches(q)) out.branches.push_back(normalize(b));
  std::sort(out.branches.begin(), out.branches.end(),
            [](const QueryAst& a, const QueryAst& b) { return compare(a, b) < 0; });
  return out;
}

// --- classification ----------------------------------------------------------

namespace {

bool is_entity(const QueryAst& q) { return q.kind == QueryAst::Kind::entity; }

// Chain of exactly n translations ending at an anchor entity.
bool is_chain(const QueryAst& q, int n) {
  if (n == 0) return is_entity(q);
  return q.kind == QueryAst::Kind::translate && is_chain(q.children[0], n - 1);
}

bool all_children(const QueryAst& q, auto pred) {
  return std::all_of(q.children.begin(), q.children.end(), pred);
}

}  // namespace

StructureTag classify(const QueryAst& q) {
  const auto one_hop = [](const QueryAst& c) { return is_chain(c, 1); };
  if (is_chain(q, 1)) return StructureTag::t1;
  if (is_chain(q, 2)) return StructureTag::t2;
  if (is_chain(q, 3)) return StructureTag::t3;
  if (q.kind == QueryAst::Kind::intersect && all_children(q, one_hop)) {
    if (q.children.size() == 2) return StructureTag::i2;
    if (q.children.size() == 3) return StructureTag::i3;
  }
  if (q.kind == QueryAst::Kind::unite && q.children.size() == 2 && all_children(q, is_entity))
    return StructureTag::u2;
  if (q.kind == QueryAst::Kind::translate) {
    const QueryAst& inner = q.children[0];
    if (inner.kind == QueryAst::Kind::intersect && inner.children.size() == 2 &&
        all_children(inner, one_hop))
      return StructureTag::ip;
    if (inner.kind == QueryAst::Kind::unite && inner.children.size() == 2 &&
        all_children(inner, is_entity))
      return StructureTag::up;
  }
  if (q.kind == QueryAst::Kind::intersect && q.children.size() == 2) {
    const bool a2b1 = is_chain(q.children[0], 2) && is_chain(q.children[1], 1);
    const bool a1b2 = is_chain(q.children[0], 1) && is_chain(q.children[1], 2);
    if (a2b1 || a1b2) return StructureTag::pi;
  }
  throw DataError("query shape does not match any benchmark structure");
}

// --- semantics ---------------------------------------------------------------

std::set<EntityId> oracle_answers(const QueryAst& q, const TripleStore& kg) {
  switch (q.kind) {
    case QueryAst::Kind::entity:
      return {q.id};
    case QueryAst::Kind::translate: {
      std::set<EntityId> out;
      for (EntityId e : oracle_answers(q.children[0], kg)) {
        const auto& succ = kg.successors(e, q.id);
        out.insert(succ.begin(), succ.end());
      }
      return out;
    }
    case QueryAst::Kind::intersect: {
      std::set<EntityId> out = oracle_answers(q.children[0], kg);
      for (std::size_t i = 1; i < q.children.size() && !out.empty(); ++i) {
        const std::set<EntityId> next = oracle_answers(q.children[i], kg);
        std::set<EntityId> merged;
        std::set_intersection(out.begin(), out.end(), next.begin(), next.end(),
                              std::inserter(merged, merged.begin()));
        out = std::move(merged);
      }
      return out;
    }
    case QueryAst::Kind::unite: {
      std::set<EntityId> out;
      for (const QueryAst& c : q.children) {
        const std::set<EntityId> next = oracle_answers(c, kg);
        out.insert(next.begin(), next.end());
      }
      return out;
    }
  }
  return {};
}

}  // namespace horo
