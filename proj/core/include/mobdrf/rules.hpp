#pragma once
#include <cstddef>
#include <string>
#include <vector>

#include "mobdrf/dataset.hpp"
#include "mobdrf/mobtree.hpp"
#include "mobdrf/stack.hpp"

namespace mobdrf {

// Atomic predicate over one feature. Set atoms evaluate by level string:
// an unseen level makes an In atom false and a NotIn atom true, mirroring
// the trees' right-routing rule.
struct Atom {
    enum class Rel { Le, Gt, In, NotIn, True, False };
    std::string feature;
    Rel rel = Rel::True;
    double value = 0.0;               // Le / Gt
    std::vector<std::string> levels;  // In / NotIn, nonempty

    static Atom le(std::string f, double v);
    static Atom gt(std::string f, double v);
    static Atom in(std::string f, std::vector<std::string> lv);
    static Atom not_in(std::string f, std::vector<std::string> lv);
    static Atom truth();
    static Atom falsity();
};

struct RuleExpr {
    enum class Kind { Leaf, And, Or };
    Kind kind = Kind::Leaf;
    Atom atom;                   // Kind::Leaf
    std::vector<RuleExpr> kids;  // And / Or, nonempty

    static RuleExpr leaf(Atom a);
    static RuleExpr make_and(std::vector<RuleExpr> kids);
    static RuleExpr make_or(std::vector<RuleExpr> kids);
    bool is_true() const { return kind == Kind::Leaf && atom.rel == Atom::Rel::True; }
    bool is_false() const { return kind == Kind::Leaf && atom.rel == Atom::Rel::False; }
};

// IF expr THEN target = model
struct Rule {
    RuleExpr expr;
    std::string target;
    LocalModel model;      // constant payloads use an intercept-only model
};

// Leaf rule in terms of the tree's own (possibly encoded) input features.
// Level-subset atoms over encoded features T_<l>_<t> become disjunctions of
// equality atoms; raw categorical features keep their In/NotIn atoms so that
// unseen-level semantics survive rendering.
Rule leaf_to_layered_rule(const MobTree& tree, int leaf_id);

// Recursively replaces every encoded-feature atom with the source leaf's
// path conjunction until only raw features remain. `layer` is the layer
// whose features the expression currently references.
RuleExpr expand_expr(const RuleExpr& expr, const MobDrfModel& model, int layer);
Rule expand_rule(const Rule& rule, const MobDrfModel& model, int layer);

// Rows of ds on which the expression evaluates true.
std::vector<std::size_t> members(const RuleExpr& expr, const Dataset& ds);
bool eval_expr(const RuleExpr& expr, const Dataset& ds, std::size_t row);

// Per-feature tightening inside conjunctions: numeric atoms merge to the
// tightest interval, set atoms intersect/difference, contradictions collapse
// to FALSE. Membership-preserving and idempotent; disjunction groups are
// simplified member-wise but never merged.
RuleExpr simplify_conjunction(const RuleExpr& expr);

// Rendering follows the grammar
//   RULE  := "IF" EXPR "THEN" MODEL
//   EXPR  := GROUP ("AND" GROUP)*
//   GROUP := ATOM | "(" DISJ ")"
//   DISJ  := CONJ ("OR" CONJ)*
//   CONJ  := ATOM ("AND" ATOM)*
//   ATOM  := name ("<="|">") number | name ("IN"|"NOT IN") "{" level ("," level)* "}"
//          | name "=" level | "TRUE" | "FALSE"
//   MODEL := name "=" coef (("+"|"-") coef "*" name)*
// Expressions nested deeper than GROUP/DISJ/CONJ allows (multi-layer
// expansions) are locally distributed into OR-of-conjunction form first;
// membership is preserved exactly. Model coefficients print with four
// decimals, thresholds with full round-trip precision.
std::string render_rule(const Rule& rule);
std::string render_expr(const RuleExpr& expr);
std::string render_model(const std::string& target, const LocalModel& model);

Rule parse_rule(const std::string& text);

struct SubgroupReport {
    int leaf_id = 0;
    Rule layered;
    Rule expanded;
    std::optional<Rule> simplified;  // layered with conjunctions tightened
    std::size_t member_count = 0;
    double member_fraction = 0.0;
};

// Reports for every leaf of a final MOB model, with member counts taken on
// `reference` (raw features). Throws InternalError if the expanded and
// layered member sets ever disagree - that equality is the core contract of
// rule expansion.
std::vector<SubgroupReport> subgroup_reports(const MobDrfModel& model,
                                             const FinalModel& fm,
                                             const Dataset& reference,
                                             bool simplify);

std::string render_subgroup_report(const SubgroupReport& r, std::size_t n_reference);

} // namespace mobdrf
