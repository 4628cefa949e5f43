#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "memq/sparql.hpp"

namespace memq::decomp {

/// Raised when a statement would need more than three non-CVT endpoints.
class PlaceholderOverflow : public Error {
public:
    using Error::Error;
};

/// How CVT variables are recognized. At least one mechanism stays enabled.
struct CvtCatalog {
    std::set<std::string> explicit_ids;      // relation curies producing CVT objects
    bool name_heuristic = true;              // ?cvt, ?cvt0, ?cvt1, ...

    // Relation triples whose co-occurrence around one CVT is describable as a
    // single three-legged statement. Loaded from catalog lines carrying three
    // curies instead of one.
    std::set<std::array<std::string, 3>> joint_groups;

    static CvtCatalog load(const std::filesystem::path& path);
    bool is_joint_group(std::array<std::string, 3> relations) const;
};

enum class StructureType { S1, S2, S3, CvtAux, Filter, Modifier };

std::string structure_type_name(StructureType t);

struct ModifierSpec {
    sparql::Term sort_var;
    sparql::SortDirection direction = sparql::SortDirection::Asc;
    std::optional<long> limit;

    bool operator==(const ModifierSpec&) const = default;
};

/// One atomic statement in placeholder form. Placeholders are drawn from
/// {?entity1, ?entity2, ?entity3, ?cvt}; `binding_example` records what each
/// placeholder stood for in the source query.
struct StatementTemplate {
    std::string id; // stable hash of the normalized content
    StructureType structure_type = StructureType::S1;
    std::vector<sparql::PatternElement> elements;          // empty for Modifier
    std::optional<ModifierSpec> modifier;                  // Modifier only
    std::vector<sparql::PatternElement> context_elements;  // CvtAux chain context
    std::vector<std::string> relation_labels;              // predicate curies in order
    std::vector<std::string> anchor_roles;                 // entry-point placeholders
    std::map<std::string, sparql::Term> binding_example;   // placeholder -> source term

    bool is_graph_statement() const {
        return structure_type == StructureType::S1 || structure_type == StructureType::S2 ||
               structure_type == StructureType::S3 || structure_type == StructureType::CvtAux;
    }
};

struct DecompositionResult {
    std::vector<StatementTemplate> statements;
    std::string source_query_id;
    std::map<std::string, std::vector<size_t>> coverage; // statement id -> triple indices
    std::vector<std::string> diagnostics;                // e.g. dangling CVT reports
};

/// A statement as extracted from a query, before placeholder normalization.
struct RawStatement {
    std::vector<sparql::PatternElement> elements;
    std::optional<ModifierSpec> modifier;
    std::vector<sparql::PatternElement> context;
    std::set<std::string> cvt_vars;    // variables playing the CVT role
    std::set<std::string> known_terms; // variable names known before this statement
    std::vector<size_t> triple_indices;
};

/// Variables classified as CVT nodes, by name heuristic and/or catalog.
std::set<std::string> detect_cvt_nodes(const sparql::SparqlQuery& q, const CvtCatalog& catalog);

/// Split a query into atomic statements. Non-boilerplate triples are
/// partitioned; boilerplate filters (language filter, topic self-exclusion)
/// are dropped here and re-added at assembly time.
DecompositionResult decompose(const sparql::SparqlQuery& q, const CvtCatalog& catalog,
                              const std::string& query_id = "");

/// Map concrete entities and free variables to placeholder roles. Endpoints
/// already known (grounded or previously seen) become ?entity1 first; the new
/// endpoint becomes the highest placeholder.
StatementTemplate normalize_template(const RawStatement& raw);

StructureType classify_structure(const StatementTemplate& stmt);

/// True for filters that are replayed boilerplate rather than semantics: the
/// language filter and `?x != <entity>` self-exclusions.
bool is_boilerplate_filter(const sparql::FilterExpr& f);

} // namespace memq::decomp
