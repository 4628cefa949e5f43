#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "memq/errors.hpp"

namespace memq::sparql {

/// Raised on malformed input; carries the position of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& message, size_t line, size_t column)
        : Error(message + " (line " + std::to_string(line) + ", column " +
                std::to_string(column) + ")"),
          line(line), column(column) {}
    size_t line;
    size_t column;
};

/// Raised for syntactically valid SPARQL that falls outside the supported
/// dialect (OPTIONAL, aggregates, property paths, ...). Unsupported input is
/// always rejected, never dropped.
class UnsupportedConstruct : public Error {
public:
    using Error::Error;
};

enum class TermKind { Iri, Variable, Literal };

/// One RDF term: an IRI in curie form (`ns:m.06c97`), a variable (`?x`), or a
/// literal kept as its lexical form plus optional language tag / datatype.
struct Term {
    TermKind kind = TermKind::Iri;
    std::string value;
    std::string lang;     // literals only
    std::string datatype; // literals only, curie form

    bool operator==(const Term&) const = default;
};

Term make_iri(std::string curie);
Term make_var(std::string name);
Term make_literal(std::string lexical, std::string lang = "", std::string datatype = "");

/// True when `name` is a legal variable token (`?` + identifier).
bool is_valid_variable_name(std::string_view name);

struct TriplePattern {
    Term subject;
    Term predicate; // always an IRI
    Term object;

    bool operator==(const TriplePattern&) const = default;
};

enum class FilterKind { Equality, Inequality, LangBoilerplate, Comparison };
enum class CompareOp { Less, LessEq, Greater, GreaterEq };

struct FilterExpr {
    FilterKind kind = FilterKind::Equality;
    Term target;                       // the constrained variable
    Term value;                        // Equality / Inequality / Comparison
    CompareOp op = CompareOp::Less;    // Comparison only
    bool datetime_cast = false;        // Comparison wraps target in xsd:datetime(...)

    bool operator==(const FilterExpr&) const = default;
};

struct PatternElement;
using PatternGroup = std::vector<PatternElement>;

struct UnionExpr {
    std::vector<PatternGroup> branches; // >= 2 branches, each non-empty

    bool operator==(const UnionExpr&) const;
};

struct PatternElement {
    std::variant<TriplePattern, FilterExpr, UnionExpr> node;

    bool operator==(const PatternElement&) const = default;

    bool is_triple() const { return std::holds_alternative<TriplePattern>(node); }
    bool is_filter() const { return std::holds_alternative<FilterExpr>(node); }
    bool is_union() const { return std::holds_alternative<UnionExpr>(node); }
    const TriplePattern& triple() const { return std::get<TriplePattern>(node); }
    const FilterExpr& filter() const { return std::get<FilterExpr>(node); }
    const UnionExpr& union_expr() const { return std::get<UnionExpr>(node); }
};

PatternElement element(TriplePattern t);
PatternElement element(FilterExpr f);
PatternElement element(UnionExpr u);

enum class SortDirection { Asc, Desc };

struct OrderSpec {
    Term variable;
    SortDirection direction = SortDirection::Asc;

    bool operator==(const OrderSpec&) const = default;
};

struct SparqlQuery {
    std::vector<std::pair<std::string, std::string>> prefixes; // prefix -> base IRI
    bool distinct = false;
    std::vector<Term> select_vars;
    std::vector<PatternElement> where;
    std::optional<OrderSpec> order_by;
    std::optional<long> limit;

    bool operator==(const SparqlQuery&) const = default;
};

/// The curie prefixes every query in this dialect may rely on.
const std::vector<std::pair<std::string, std::string>>& default_prefixes();

/// Parse a SELECT query of the restricted dialect into an AST.
SparqlQuery parse_query(std::string_view text);

/// Parse a bare group of pattern elements (triples / filters / unions) or a
/// trailing `ORDER BY ... LIMIT ...` clause, as used for statement fragments.
struct FragmentResult {
    std::vector<PatternElement> elements;
    std::optional<OrderSpec> order_by;
    std::optional<long> limit;
};
FragmentResult parse_fragment(std::string_view text);

/// Canonical text form: one pattern element per line, elements in stored
/// order, single spaces between tokens. parse(serialize(q)) == q.
std::string serialize_query(const SparqlQuery& q);
std::string serialize_element(const PatternElement& e);
std::string serialize_term(const Term& t);

/// Variables in first-occurrence order over the WHERE clause.
std::vector<std::string> collect_variables(const SparqlQuery& q);
std::vector<std::string> collect_variables(const std::vector<PatternElement>& elements);

/// Rename every variable outside `keep` to ?v0, ?v1, ... in first-occurrence
/// order. The renaming is a bijection and the operation is idempotent.
SparqlQuery canonicalize_variables(const SparqlQuery& q, const std::set<std::string>& keep);

/// Expand a curie against the query's prefixes (parse-time helper, exposed
/// for tests of the expand/compact identity).
std::string expand_curie(const std::string& curie,
                         const std::vector<std::pair<std::string, std::string>>& prefixes);
std::string compact_iri(const std::string& full_iri,
                        const std::vector<std::pair<std::string, std::string>>& prefixes);

} // namespace memq::sparql
