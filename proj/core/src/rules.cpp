#include "mobdrf/rules.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace mobdrf {

// ---------------------------------------------------------------------------
// Atom / RuleExpr constructors
// ---------------------------------------------------------------------------

Atom Atom::le(std::string f, double v) { return Atom{std::move(f), Rel::Le, v, {}}; }
Atom Atom::gt(std::string f, double v) { return Atom{std::move(f), Rel::Gt, v, {}}; }
Atom Atom::in(std::string f, std::vector<std::string> lv) {
    if (lv.empty()) throw InternalError("empty level set in an In atom");
    return Atom{std::move(f), Rel::In, 0.0, std::move(lv)};
}
Atom Atom::not_in(std::string f, std::vector<std::string> lv) {
    if (lv.empty()) throw InternalError("empty level set in a NotIn atom");
    return Atom{std::move(f), Rel::NotIn, 0.0, std::move(lv)};
}
Atom Atom::truth() { return Atom{"", Rel::True, 0.0, {}}; }
Atom Atom::falsity() { return Atom{"", Rel::False, 0.0, {}}; }

RuleExpr RuleExpr::leaf(Atom a) {
    RuleExpr e;
    e.kind = Kind::Leaf;
    e.atom = std::move(a);
    return e;
}
RuleExpr RuleExpr::make_and(std::vector<RuleExpr> kids) {
    if (kids.empty()) throw InternalError("empty And");
    if (kids.size() == 1) return std::move(kids[0]);
    RuleExpr e;
    e.kind = Kind::And;
    e.kids = std::move(kids);
    return e;
}
RuleExpr RuleExpr::make_or(std::vector<RuleExpr> kids) {
    if (kids.empty()) throw InternalError("empty Or");
    if (kids.size() == 1) return std::move(kids[0]);
    RuleExpr e;
    e.kind = Kind::Or;
    e.kids = std::move(kids);
    return e;
}

// ---------------------------------------------------------------------------
// Encoded-feature names
// ---------------------------------------------------------------------------

namespace {

bool parse_uint(std::string_view s, int& out) {
    if (s.empty()) return false;
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 0) return false;
    out = v;
    return true;
}

// T_<layer>_<tree>
bool parse_encoded_name(const std::string& name, int& layer, int& tree) {
    if (name.size() < 5 || name[0] != 'T' || name[1] != '_') return false;
    const auto second = name.find('_', 2);
    if (second == std::string::npos) return false;
    return parse_uint(std::string_view(name).substr(2, second - 2), layer) &&
           parse_uint(std::string_view(name).substr(second + 1), tree);
}

bool parse_leaf_level(const std::string& level, int& leaf) {
    if (level.size() < 3 || level[0] != 'R' || level[1] != '_') return false;
    return parse_uint(std::string_view(level).substr(2), leaf);
}

bool looks_encoded(const std::string& variable, std::span<const std::string> levels) {
    int l = 0, t = 0, r = 0;
    if (!parse_encoded_name(variable, l, t)) return false;
    for (const auto& lv : levels)
        if (!parse_leaf_level(lv, r)) return false;
    return true;
}

RuleExpr or_of_equalities(const std::string& variable,
                          const std::vector<std::string>& levels) {
    std::vector<RuleExpr> eqs;
    eqs.reserve(levels.size());
    for (const auto& lv : levels) eqs.push_back(RuleExpr::leaf(Atom::in(variable, {lv})));
    return RuleExpr::make_or(std::move(eqs));
}

// One path step as an expression over the tree's own input features.
// Level-subset steps over encoded features render as equality disjunctions
// (the right branch uses the closed-universe complement); raw categorical
// steps keep In/NotIn so unseen levels still route right.
RuleExpr path_atom_expr(const PathAtom& pa) {
    const SplitCondition& c = pa.cond;
    if (!c.categorical) {
        return RuleExpr::leaf(pa.went_left ? Atom::le(c.variable, c.threshold)
                                           : Atom::gt(c.variable, c.threshold));
    }
    if (pa.went_left) {
        if (looks_encoded(c.variable, c.left_levels))
            return or_of_equalities(c.variable, c.left_levels);
        return RuleExpr::leaf(Atom::in(c.variable, c.left_levels));
    }
    if (looks_encoded(c.variable, c.right_levels) && !c.right_levels.empty())
        return or_of_equalities(c.variable, c.right_levels);
    return RuleExpr::leaf(Atom::not_in(c.variable, c.left_levels));
}

} // namespace

Rule leaf_to_layered_rule(const MobTree& tree, int leaf_id) {
    const std::vector<LeafRule> rules = tree.extract_rules();
    if (leaf_id < 1 || leaf_id > static_cast<int>(rules.size()))
        throw DataError("leaf_to_layered_rule: no leaf " + std::to_string(leaf_id));
    const LeafRule& lr = rules[static_cast<std::size_t>(leaf_id - 1)];
    Rule rule;
    rule.target = tree.target_name();
    rule.model = *lr.model;
    if (lr.atoms.empty()) {
        rule.expr = RuleExpr::leaf(Atom::truth());
    } else {
        std::vector<RuleExpr> conj;
        conj.reserve(lr.atoms.size());
        for (const PathAtom& pa : lr.atoms) conj.push_back(path_atom_expr(pa));
        rule.expr = RuleExpr::make_and(std::move(conj));
    }
    return rule;
}

// ---------------------------------------------------------------------------
// Expansion
// ---------------------------------------------------------------------------

namespace {

RuleExpr expand_encoded_atom(const Atom& atom, const MobDrfModel& model, int layer,
                             int tree_index) {
    const RuleForest& forest = model.layer(layer);
    const MobTree& tree = forest.trees[static_cast<std::size_t>(tree_index - 1)];

    std::set<int> ids;
    for (const auto& lv : atom.levels) {
        int leaf = 0;
        if (!parse_leaf_level(lv, leaf) || leaf < 1 || leaf > tree.n_leaves())
            throw DataError("expand: rule references unknown leaf '" + lv + "' of " +
                            atom.feature);
        ids.insert(leaf);
    }
    if (atom.rel == Atom::Rel::NotIn) {
        std::set<int> complement;
        for (int j = 1; j <= tree.n_leaves(); ++j)
            if (!ids.count(j)) complement.insert(j);
        ids = std::move(complement);
        if (ids.empty()) return RuleExpr::leaf(Atom::falsity());
    }

    const std::vector<LeafRule> leaf_rules = tree.extract_rules();
    std::vector<RuleExpr> branches;
    branches.reserve(ids.size());
    for (int id : ids) {
        const LeafRule& lr = leaf_rules[static_cast<std::size_t>(id - 1)];
        RuleExpr path;
        if (lr.atoms.empty()) {
            path = RuleExpr::leaf(Atom::truth());
        } else {
            std::vector<RuleExpr> conj;
            conj.reserve(lr.atoms.size());
            for (const PathAtom& pa : lr.atoms) conj.push_back(path_atom_expr(pa));
            path = RuleExpr::make_and(std::move(conj));
        }
        branches.push_back(expand_expr(path, model, layer - 1));
    }
    return RuleExpr::make_or(std::move(branches));
}

} // namespace

RuleExpr expand_expr(const RuleExpr& expr, const MobDrfModel& model, int layer) {
    if (layer <= 0) return expr;
    switch (expr.kind) {
        case RuleExpr::Kind::Leaf: {
            const Atom& a = expr.atom;
            if (a.rel == Atom::Rel::In || a.rel == Atom::Rel::NotIn) {
                int l = 0, t = 0;
                if (parse_encoded_name(a.feature, l, t) && l == layer && t >= 1 &&
                    l <= model.n_layers() && t <= model.layer(l).size()) {
                    return expand_encoded_atom(a, model, layer, t);
                }
            }
            return expr;
        }
        case RuleExpr::Kind::And:
        case RuleExpr::Kind::Or: {
            std::vector<RuleExpr> kids;
            kids.reserve(expr.kids.size());
            for (const RuleExpr& k : expr.kids) kids.push_back(expand_expr(k, model, layer));
            return expr.kind == RuleExpr::Kind::And ? RuleExpr::make_and(std::move(kids))
                                                    : RuleExpr::make_or(std::move(kids));
        }
    }
    throw InternalError("expand_expr: bad expression kind");
}

Rule expand_rule(const Rule& rule, const MobDrfModel& model, int layer) {
    Rule out = rule;
    out.expr = expand_expr(rule.expr, model, layer);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

bool eval_atom(const Atom& a, const Dataset& ds, std::size_t row) {
    switch (a.rel) {
        case Atom::Rel::True: return true;
        case Atom::Rel::False: return false;
        case Atom::Rel::Le:
        case Atom::Rel::Gt: {
            const Column& c = ds.col(a.feature);
            if (c.kind != ColumnKind::Numeric)
                throw DataError("rule atom on '" + a.feature + "': column is not numeric");
            return a.rel == Atom::Rel::Le ? c.num[row] <= a.value : c.num[row] > a.value;
        }
        case Atom::Rel::In:
        case Atom::Rel::NotIn: {
            const Column& c = ds.col(a.feature);
            if (c.kind != ColumnKind::Categorical)
                throw DataError("rule atom on '" + a.feature + "': column is not categorical");
            const std::string& level = c.level_of(row);
            const bool found =
                std::find(a.levels.begin(), a.levels.end(), level) != a.levels.end();
            return a.rel == Atom::Rel::In ? found : !found;
        }
    }
    throw InternalError("eval_atom: bad relation");
}

} // namespace

bool eval_expr(const RuleExpr& expr, const Dataset& ds, std::size_t row) {
    switch (expr.kind) {
        case RuleExpr::Kind::Leaf: return eval_atom(expr.atom, ds, row);
        case RuleExpr::Kind::And:
            for (const RuleExpr& k : expr.kids)
                if (!eval_expr(k, ds, row)) return false;
            return true;
        case RuleExpr::Kind::Or:
            for (const RuleExpr& k : expr.kids)
                if (eval_expr(k, ds, row)) return true;
            return false;
    }
    throw InternalError("eval_expr: bad expression kind");
}

std::vector<std::size_t> members(const RuleExpr& expr, const Dataset& ds) {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < ds.n_rows(); ++r)
        if (eval_expr(expr, ds, r)) out.push_back(r);
    return out;
}

// ---------------------------------------------------------------------------
// Conjunction simplification
// ---------------------------------------------------------------------------

namespace {

struct FeatureState {
    bool has_le = false, has_gt = false;
    double le = 0.0, gt = 0.0;
    bool has_in = false, has_notin = false;
    std::vector<std::string> in_set;     // order of first appearance
    std::vector<std::string> notin_set;  // order of first appearance
    std::size_t first_seen = 0;
};

void add_level_unique(std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

} // namespace

RuleExpr simplify_conjunction(const RuleExpr& expr) {
    if (expr.kind == RuleExpr::Kind::Leaf) return expr;
    if (expr.kind == RuleExpr::Kind::Or) {
        std::vector<RuleExpr> kids;
        kids.reserve(expr.kids.size());
        for (const RuleExpr& k : expr.kids) kids.push_back(simplify_conjunction(k));
        return RuleExpr::make_or(std::move(kids));
    }

    // flatten nested Ands, simplify non-atom children member-wise
    std::vector<Atom> atoms;
    std::vector<RuleExpr> groups;
    auto collect = [&](auto&& self, const RuleExpr& e) -> void {
        if (e.kind == RuleExpr::Kind::Leaf) {
            atoms.push_back(e.atom);
        } else if (e.kind == RuleExpr::Kind::And) {
            for (const RuleExpr& k : e.kids) self(self, k);
        } else {
            groups.push_back(simplify_conjunction(e));
        }
    };
    collect(collect, expr);

    std::map<std::string, FeatureState> state;
    std::vector<std::string> feature_order;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const Atom& a = atoms[i];
        if (a.rel == Atom::Rel::True) continue;
        if (a.rel == Atom::Rel::False) return RuleExpr::leaf(Atom::falsity());
        auto it = state.find(a.feature);
        if (it == state.end()) {
            it = state.emplace(a.feature, FeatureState{}).first;
            it->second.first_seen = i;
            feature_order.push_back(a.feature);
        }
        FeatureState& fs = it->second;
        switch (a.rel) {
            case Atom::Rel::Le:
                fs.le = fs.has_le ? std::min(fs.le, a.value) : a.value;
                fs.has_le = true;
                break;
            case Atom::Rel::Gt:
                fs.gt = fs.has_gt ? std::max(fs.gt, a.value) : a.value;
                fs.has_gt = true;
                break;
            case Atom::Rel::In: {
                if (!fs.has_in) {
                    fs.in_set = a.levels;
                    fs.has_in = true;
                } else {
                    std::vector<std::string> merged;
                    for (const auto& lv : fs.in_set)
                        if (std::find(a.levels.begin(), a.levels.end(), lv) != a.levels.end())
                            merged.push_back(lv);
                    fs.in_set = std::move(merged);
                }
                break;
            }
            case Atom::Rel::NotIn: {
                fs.has_notin = true;
                for (const auto& lv : a.levels) add_level_unique(fs.notin_set, lv);
                break;
            }
            default: break;
        }
    }

    std::vector<RuleExpr> out;
    for (const std::string& feat : feature_order) {
        FeatureState& fs = state[feat];
        if (fs.has_le && fs.has_gt && fs.gt >= fs.le)
            return RuleExpr::leaf(Atom::falsity());  // empty interval
        if (fs.has_gt) out.push_back(RuleExpr::leaf(Atom::gt(feat, fs.gt)));
        if (fs.has_le) out.push_back(RuleExpr::leaf(Atom::le(feat, fs.le)));
        if (fs.has_in) {
            // NotIn is absorbed into the In set; an unseen level fails both ways
            std::vector<std::string> final_set;
            for (const auto& lv : fs.in_set)
                if (std::find(fs.notin_set.begin(), fs.notin_set.end(), lv) ==
                    fs.notin_set.end())
                    final_set.push_back(lv);
            if (final_set.empty()) return RuleExpr::leaf(Atom::falsity());
            out.push_back(RuleExpr::leaf(Atom::in(feat, std::move(final_set))));
        } else if (fs.has_notin) {
            out.push_back(RuleExpr::leaf(Atom::not_in(feat, fs.notin_set)));
        }
    }
    for (RuleExpr& g : groups) out.push_back(std::move(g));
    if (out.empty()) return RuleExpr::leaf(Atom::truth());
    return RuleExpr::make_and(std::move(out));
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

// EXPR-shaped view: conjunction of groups, each group a disjunction of
// conjunctions of atoms. Deeper nesting (from multi-layer expansion) is
// distributed locally into this shape; membership is preserved.
using Conj = std::vector<Atom>;
using Disj = std::vector<Conj>;

constexpr std::size_t kMaxRenderedConjunctions = 100000;

// DNF of an arbitrary expression
Disj to_disj(const RuleExpr& e) {
    switch (e.kind) {
        case RuleExpr::Kind::Leaf:
            if (e.atom.rel == Atom::Rel::True) return {Conj{}};
            if (e.atom.rel == Atom::Rel::False) return {};
            return {Conj{e.atom}};
        case RuleExpr::Kind::Or: {
            Disj out;
            for (const RuleExpr& k : e.kids) {
                Disj part = to_disj(k);
                out.insert(out.end(), std::make_move_iterator(part.begin()),
                           std::make_move_iterator(part.end()));
            }
            return out;
        }
        case RuleExpr::Kind::And: {
            Disj acc{Conj{}};
            for (const RuleExpr& k : e.kids) {
                const Disj part = to_disj(k);
                Disj next;
                if (acc.size() * std::max<std::size_t>(part.size(), 1) > kMaxRenderedConjunctions)
                    throw InternalError("rule too large to render in grammar form");
                for (const Conj& a : acc)
                    for (const Conj& b : part) {
                        Conj merged = a;
                        merged.insert(merged.end(), b.begin(), b.end());
                        next.push_back(std::move(merged));
                    }
                acc = std::move(next);
            }
            return acc;
        }
    }
    throw InternalError("to_disj: bad expression kind");
}

struct ExprShape {
    bool is_true = false, is_false = false;
    std::vector<Disj> groups;  // each group has >= 2 conjunctions or is a lone multi-atom conj
};

ExprShape to_expr_shape(const RuleExpr& e) {
    ExprShape shape;
    // top level: And distributes over groups, everything else is one group
    std::vector<const RuleExpr*> top;
    if (e.kind == RuleExpr::Kind::And) {
        auto flatten = [&](auto&& self, const RuleExpr& node) -> void {
            if (node.kind == RuleExpr::Kind::And)
                for (const RuleExpr& k : node.kids) self(self, k);
            else
                top.push_back(&node);
        };
        flatten(flatten, e);
    } else {
        top.push_back(&e);
    }
    for (const RuleExpr* part : top) {
        Disj d = to_disj(*part);
        if (d.empty()) {  // FALSE group kills the whole conjunction
            shape.is_false = true;
            shape.groups.clear();
            return shape;
        }
        // drop tautological groups (a conjunction that is empty == TRUE)
        bool has_true_conj = false;
        for (const Conj& c : d)
            if (c.empty()) has_true_conj = true;
        if (has_true_conj) continue;
        shape.groups.push_back(std::move(d));
    }
    if (shape.groups.empty()) shape.is_true = true;
    return shape;
}

std::string format_coef(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    std::string s = buf;
    if (s == "-0.0000") s = "0.0000";
    return s;
}

bool simple_level_token(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (std::isspace(static_cast<unsigned char>(c)) ||
            std::string_view("(){},=*+<>").find(c) != std::string_view::npos)
            return false;
    return true;
}

void render_atom(std::ostream& out, const Atom& a) {
    switch (a.rel) {
        case Atom::Rel::True: out << "TRUE"; return;
        case Atom::Rel::False: out << "FALSE"; return;
        case Atom::Rel::Le: out << a.feature << " <= " << format_double(a.value); return;
        case Atom::Rel::Gt: out << a.feature << " > " << format_double(a.value); return;
        case Atom::Rel::In:
            if (a.levels.size() == 1 && simple_level_token(a.levels[0])) {
                out << a.feature << " = " << a.levels[0];
                return;
            }
            [[fallthrough]];
        case Atom::Rel::NotIn: {
            out << a.feature << (a.rel == Atom::Rel::In ? " IN {" : " NOT IN {");
            for (std::size_t i = 0; i < a.levels.size(); ++i) {
                if (i) out << ", ";
                out << a.levels[i];
            }
            out << "}";
            return;
        }
    }
}

void render_conj(std::ostream& out, const Conj& c) {
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (i) out << " AND ";
        render_atom(out, c[i]);
    }
}

} // namespace

std::string render_expr(const RuleExpr& expr) {
    const ExprShape shape = to_expr_shape(expr);
    if (shape.is_true) return "TRUE";
    if (shape.is_false) return "FALSE";
    std::ostringstream out;
    bool first = true;
    for (const Disj& group : shape.groups) {
        if (!first) out << " AND ";
        first = false;
        if (group.size() == 1 && group[0].size() == 1) {
            render_atom(out, group[0][0]);
        } else if (group.size() == 1) {
            out << "(";
            render_conj(out, group[0]);
            out << ")";
        } else {
            out << "(";
            for (std::size_t i = 0; i < group.size(); ++i) {
                if (i) out << " OR ";
                render_conj(out, group[i]);
            }
            out << ")";
        }
    }
    return out.str();
}

std::string render_model(const std::string& target, const LocalModel& model) {
    std::ostringstream out;
    out << target << " = " << format_coef(model.theta.empty() ? 0.0 : model.theta[0]);
    for (std::size_t j = 1; j < model.theta.size(); ++j) {
        const double v = model.theta[j];
        out << (v < 0 ? " - " : " + ") << format_coef(std::abs(v)) << " * "
            << model.column_map[j];
    }
    return out.str();
}

std::string render_rule(const Rule& rule) {
    return "IF " + render_expr(rule.expr) + " THEN " + render_model(rule.target, rule.model);
}

// ---------------------------------------------------------------------------
// Parsing (the inverse of render_rule, for round-trip checks and tooling)
// ---------------------------------------------------------------------------

namespace {

struct Token {
    enum class Type { Name, Number, Punct, End };
    Type type = Type::End;
    std::string text;
    double number = 0.0;
};

class Lexer {
public:
    explicit Lexer(std::string_view s) : s_(s) {}

    const Token& peek() {
        if (!have_) {
            current_ = lex();
            have_ = true;
        }
        return current_;
    }
    Token next() {
        Token t = peek();
        have_ = false;
        return t;
    }
    // raw text until one of the stop characters; used for levels inside {}
    std::string raw_until(std::string_view stops) {
        have_ = false;
        std::size_t start = pos_;
        while (pos_ < s_.size() && stops.find(s_[pos_]) == std::string_view::npos) ++pos_;
        std::size_t end = pos_;
        while (start < end && std::isspace(static_cast<unsigned char>(s_[start]))) ++start;
        while (end > start && std::isspace(static_cast<unsigned char>(s_[end - 1]))) --end;
        return std::string(s_.substr(start, end - start));
    }

private:
    Token lex() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ >= s_.size()) return Token{};
        const char c = s_[pos_];
        if (c == '<' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '=') {
            pos_ += 2;
            return Token{Token::Type::Punct, "<=", 0.0};
        }
        if (std::string_view("(){},=*+->").find(c) != std::string_view::npos) {
            ++pos_;
            return Token{Token::Type::Punct, std::string(1, c), 0.0};
        }
        // try a number first so "0.5" and "12" don't lex as names
        {
            double v = 0.0;
            auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
            if (ec == std::errc() && p != s_.data() + pos_) {
                const char after = p < s_.data() + s_.size() ? *p : ' ';
                if (std::isspace(static_cast<unsigned char>(after)) ||
                    std::string_view("(){},=*+-<>").find(after) != std::string_view::npos) {
                    Token t;
                    t.type = Token::Type::Number;
                    t.text = std::string(s_.data() + pos_, p);
                    t.number = v;
                    pos_ = static_cast<std::size_t>(p - s_.data());
                    return t;
                }
            }
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) &&
               std::string_view("(){},=*+<>").find(s_[pos_]) == std::string_view::npos)
            ++pos_;
        return Token{Token::Type::Name, std::string(s_.substr(start, pos_ - start)), 0.0};
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    Token current_;
    bool have_ = false;
};

[[noreturn]] void parse_fail(const std::string& what, const Token& got) {
    throw DataError("parse_rule: expected " + what + ", got '" +
                    (got.type == Token::Type::End ? "<end>" : got.text) + "'");
}

bool is_keyword(const Token& t, std::string_view kw) {
    return t.type == Token::Type::Name && t.text == kw;
}

class RuleParser {
public:
    explicit RuleParser(std::string_view text) : lex_(text) {}

    Rule parse() {
        expect_keyword("IF");
        Rule rule;
        rule.expr = parse_expr();
        expect_keyword("THEN");
        parse_model(rule);
        if (lex_.peek().type != Token::Type::End) parse_fail("end of rule", lex_.peek());
        return rule;
    }

private:
    Lexer lex_;

    void expect_keyword(std::string_view kw) {
        const Token t = lex_.next();
        if (!is_keyword(t, kw)) parse_fail(std::string(kw), t);
    }
    void expect_punct(std::string_view p) {
        const Token t = lex_.next();
        if (t.type != Token::Type::Punct || t.text != p) parse_fail("'" + std::string(p) + "'", t);
    }

    RuleExpr parse_expr() {
        std::vector<RuleExpr> groups{parse_group()};
        while (is_keyword(lex_.peek(), "AND")) {
            lex_.next();
            groups.push_back(parse_group());
        }
        return RuleExpr::make_and(std::move(groups));
    }

    RuleExpr parse_group() {
        if (lex_.peek().type == Token::Type::Punct && lex_.peek().text == "(") {
            lex_.next();
            RuleExpr d = parse_disj();
            expect_punct(")");
            return d;
        }
        return parse_atom();
    }

    RuleExpr parse_disj() {
        std::vector<RuleExpr> conjs{parse_conj()};
        while (is_keyword(lex_.peek(), "OR")) {
            lex_.next();
            conjs.push_back(parse_conj());
        }
        return RuleExpr::make_or(std::move(conjs));
    }

    RuleExpr parse_conj() {
        std::vector<RuleExpr> atoms{parse_atom()};
        while (is_keyword(lex_.peek(), "AND")) {
            lex_.next();
            atoms.push_back(parse_atom());
        }
        return RuleExpr::make_and(std::move(atoms));
    }

    double parse_number() {
        Token t = lex_.next();
        double sign = 1.0;
        if (t.type == Token::Type::Punct && (t.text == "-" || t.text == "+")) {
            sign = t.text == "-" ? -1.0 : 1.0;
            t = lex_.next();
        }
        if (t.type != Token::Type::Number) parse_fail("number", t);
        return sign * t.number;
    }

    std::vector<std::string> parse_level_set() {
        expect_punct("{");
        std::vector<std::string> levels;
        for (;;) {
            std::string level = lex_.raw_until(",}");
            if (level.empty()) parse_fail("level", lex_.peek());
            levels.push_back(std::move(level));
            const Token t = lex_.next();
            if (t.type == Token::Type::Punct && t.text == ",") continue;
            if (t.type == Token::Type::Punct && t.text == "}") break;
            parse_fail("',' or '}'", t);
        }
        return levels;
    }

    RuleExpr parse_atom() {
        const Token name = lex_.next();
        if (name.type != Token::Type::Name) parse_fail("feature name", name);
        if (name.text == "TRUE") return RuleExpr::leaf(Atom::truth());
        if (name.text == "FALSE") return RuleExpr::leaf(Atom::falsity());
        const Token op = lex_.next();
        if (op.type == Token::Type::Punct && op.text == "<=")
            return RuleExpr::leaf(Atom::le(name.text, parse_number()));
        if (op.type == Token::Type::Punct && op.text == ">")
            return RuleExpr::leaf(Atom::gt(name.text, parse_number()));
        if (op.type == Token::Type::Punct && op.text == "=") {
            const Token level = lex_.next();
            if (level.type == Token::Type::End) parse_fail("level", level);
            return RuleExpr::leaf(Atom::in(name.text, {level.text}));
        }
        if (is_keyword(op, "IN")) return RuleExpr::leaf(Atom::in(name.text, parse_level_set()));
        if (is_keyword(op, "NOT")) {
            expect_keyword("IN");
            return RuleExpr::leaf(Atom::not_in(name.text, parse_level_set()));
        }
        parse_fail("relation", op);
    }

    void parse_model(Rule& rule) {
        const Token target = lex_.next();
        if (target.type != Token::Type::Name) parse_fail("target name", target);
        rule.target = target.text;
        expect_punct("=");
        rule.model.column_map = {"(Intercept)"};
        rule.model.theta = {parse_number()};
        for (;;) {
            const Token t = lex_.peek();
            if (t.type != Token::Type::Punct || (t.text != "+" && t.text != "-")) break;
            lex_.next();
            const double sign = t.text == "-" ? -1.0 : 1.0;
            const Token coef = lex_.next();
            if (coef.type != Token::Type::Number) parse_fail("coefficient", coef);
            expect_punct("*");
            const Token name = lex_.next();
            if (name.type != Token::Type::Name) parse_fail("coefficient name", name);
            rule.model.theta.push_back(sign * coef.number);
            rule.model.column_map.push_back(name.text);
        }
    }
};

} // namespace

Rule parse_rule(const std::string& text) { return RuleParser(text).parse(); }

// ---------------------------------------------------------------------------
// Subgroup reports
// ---------------------------------------------------------------------------

std::vector<SubgroupReport> subgroup_reports(const MobDrfModel& model,
                                             const FinalModel& fm,
                                             const Dataset& reference, bool simplify) {
    const auto* tree = std::get_if<MobTree>(&fm.model);
    if (!tree) throw DataError("subgroup reports need a MOB final model");
    const Dataset rep = transform(model, reference, fm.layer);

    std::vector<SubgroupReport> out;
    for (int leaf = 1; leaf <= tree->n_leaves(); ++leaf) {
        SubgroupReport r;
        r.leaf_id = leaf;
        r.layered = leaf_to_layered_rule(*tree, leaf);
        r.expanded = expand_rule(r.layered, model, fm.layer);
        const std::vector<std::size_t> layered_members = members(r.layered.expr, rep);
        const std::vector<std::size_t> expanded_members = members(r.expanded.expr, reference);
        if (layered_members != expanded_members)
            throw InternalError("rule expansion changed the member set of leaf " +
                                std::to_string(leaf));
        if (simplify) {
            Rule s = r.layered;
            s.expr = simplify_conjunction(s.expr);
            if (members(s.expr, rep) != layered_members)
                throw InternalError("simplification changed the member set of leaf " +
                                    std::to_string(leaf));
            r.simplified = std::move(s);
        }
        r.member_count = layered_members.size();
        r.member_fraction = reference.n_rows() == 0
                                ? 0.0
                                : static_cast<double>(layered_members.size()) /
                                      static_cast<double>(reference.n_rows());
        out.push_back(std::move(r));
    }
    return out;
}

std::string render_subgroup_report(const SubgroupReport& r, std::size_t n_reference) {
    std::ostringstream out;
    char frac[32];
    std::snprintf(frac, sizeof(frac), "%.2f", 100.0 * r.member_fraction);
    out << "subgroup " << r.leaf_id << "\n";
    out << "members: " << r.member_count << " / " << n_reference << " (" << frac << "%)\n";
    out << "layered: " << render_rule(r.layered) << "\n";
    out << "expanded: " << render_rule(r.expanded) << "\n";
    if (r.simplified) out << "simplified: " << render_rule(*r.simplified) << "\n";
    return out.str();
}

} // namespace mobdrf
