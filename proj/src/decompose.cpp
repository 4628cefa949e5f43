#include "memq/decompose.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "memq/hash.hpp"

namespace memq::decomp {

namespace {

using sparql::FilterExpr;
using sparql::FilterKind;
using sparql::PatternElement;
using sparql::SparqlQuery;
using sparql::Term;
using sparql::TermKind;
using sparql::TriplePattern;

bool is_cvt_name(const std::string& var) {
    if (var.rfind("?cvt", 0) != 0) return false;
    for (size_t i = 4; i < var.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(var[i]))) return false;
    return true;
}

std::string term_key(const Term& t) {
    return std::to_string(static_cast<int>(t.kind)) + "|" + t.value + "|" + t.lang + "|" +
           t.datatype;
}

void collect_triples(const std::vector<PatternElement>& elements,
                     std::vector<const TriplePattern*>& out) {
    for (const auto& e : elements) {
        if (e.is_triple()) out.push_back(&e.triple());
        else if (e.is_union())
            for (const auto& b : e.union_expr().branches) collect_triples(b, out);
    }
}

// Endpoint terms of a statement body, first-occurrence order. For unions the
// endpoints are the terms common to every branch; branch-local variables play
// the CVT role.
std::vector<Term> endpoint_terms(const std::vector<PatternElement>& elements,
                                 const std::set<std::string>& cvt_vars) {
    std::vector<Term> order;
    std::set<std::string> seen;
    auto add = [&](const Term& t) {
        if (t.kind == TermKind::Variable && cvt_vars.count(t.value)) return;
        std::string key = term_key(t);
        if (seen.insert(key).second) order.push_back(t);
    };
    for (const auto& e : elements) {
        if (e.is_triple()) {
            add(e.triple().subject);
            add(e.triple().object);
        } else if (e.is_filter()) {
            add(e.filter().target);
            if (e.filter().value.kind == TermKind::Variable) add(e.filter().value);
        } else {
            const auto& u = e.union_expr();
            // occurrence order from the first branch, membership from all
            std::vector<const TriplePattern*> first;
            collect_triples(u.branches.front(), first);
            std::vector<Term> candidates;
            std::set<std::string> cseen;
            for (const auto* t : first) {
                for (const Term* term : {&t->subject, &t->object}) {
                    if (term->kind == TermKind::Variable && cvt_vars.count(term->value)) continue;
                    if (cseen.insert(term_key(*term)).second) candidates.push_back(*term);
                }
            }
            for (const auto& cand : candidates) {
                bool everywhere = true;
                for (size_t bi = 1; bi < u.branches.size() && everywhere; ++bi) {
                    std::vector<const TriplePattern*> ts;
                    collect_triples(u.branches[bi], ts);
                    bool found = false;
                    for (const auto* t : ts)
                        if (t->subject == cand || t->object == cand) { found = true; break; }
                    everywhere = found;
                }
                if (everywhere) add(cand);
            }
        }
    }
    return order;
}

// Variables that occur in some but not all branches of unions inside
// `elements`; they act as branch-local intermediates.
std::set<std::string> union_local_vars(const std::vector<PatternElement>& elements) {
    std::set<std::string> locals;
    for (const auto& e : elements) {
        if (!e.is_union()) continue;
        const auto& u = e.union_expr();
        std::map<std::string, size_t> counts;
        for (const auto& b : u.branches) {
            auto vars = sparql::collect_variables(b);
            for (const auto& v : vars) counts[v] += 1;
        }
        for (const auto& [v, n] : counts)
            if (n < u.branches.size()) locals.insert(v);
    }
    return locals;
}

Term substitute_term(const Term& t, const std::map<std::string, Term>& subst) {
    if (t.kind != TermKind::Variable) return t;
    auto it = subst.find(t.value);
    return it == subst.end() ? t : it->second;
}

PatternElement substitute_element(const PatternElement& e,
                                  const std::map<std::string, Term>& subst) {
    if (e.is_triple()) {
        TriplePattern t = e.triple();
        t.subject = substitute_term(t.subject, subst);
        t.object = substitute_term(t.object, subst);
        return sparql::element(t);
    }
    if (e.is_filter()) {
        FilterExpr f = e.filter();
        f.target = substitute_term(f.target, subst);
        f.value = substitute_term(f.value, subst);
        return sparql::element(f);
    }
    sparql::UnionExpr u;
    for (const auto& b : e.union_expr().branches) {
        sparql::PatternGroup g;
        for (const auto& be : b) g.push_back(substitute_element(be, subst));
        u.branches.push_back(std::move(g));
    }
    return sparql::element(std::move(u));
}

std::string serialize_elements(const std::vector<PatternElement>& elements) {
    std::string out;
    for (const auto& e : elements) out += sparql::serialize_element(e) + "\n";
    return out;
}

std::string modifier_text(const ModifierSpec& m) {
    std::string out = "ORDER BY ";
    if (m.direction == sparql::SortDirection::Desc)
        out += "DESC(" + m.sort_var.value + ")";
    else
        out += m.sort_var.value;
    if (m.limit) out += " LIMIT " + std::to_string(*m.limit);
    return out;
}

} // namespace

std::string structure_type_name(StructureType t) {
    switch (t) {
    case StructureType::S1: return "S1";
    case StructureType::S2: return "S2";
    case StructureType::S3: return "S3";
    case StructureType::CvtAux: return "CvtAux";
    case StructureType::Filter: return "Filter";
    case StructureType::Modifier: return "Modifier";
    }
    return "S1";
}

CvtCatalog CvtCatalog::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open CVT catalog: " + path.string());
    CvtCatalog catalog;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream row(line);
        std::vector<std::string> ids;
        std::string id;
        while (row >> id) ids.push_back(id);
        if (ids.empty()) continue;
        if (ids.size() == 3) {
            std::array<std::string, 3> group = {ids[0], ids[1], ids[2]};
            std::sort(group.begin(), group.end());
            catalog.joint_groups.insert(group);
        } else {
            for (const auto& i : ids) catalog.explicit_ids.insert(i);
        }
    }
    return catalog;
}

bool CvtCatalog::is_joint_group(std::array<std::string, 3> relations) const {
    std::sort(relations.begin(), relations.end());
    return joint_groups.count(relations) > 0;
}

bool is_boilerplate_filter(const sparql::FilterExpr& f) {
    if (f.kind == FilterKind::LangBoilerplate) return true;
    return f.kind == FilterKind::Inequality && f.value.kind == TermKind::Iri;
}

std::set<std::string> detect_cvt_nodes(const SparqlQuery& q, const CvtCatalog& catalog) {
    std::set<std::string> cvt;
    std::vector<const TriplePattern*> triples;
    collect_triples(q.where, triples);
    for (const auto* t : triples) {
        if (catalog.name_heuristic) {
            if (t->subject.kind == TermKind::Variable && is_cvt_name(t->subject.value))
                cvt.insert(t->subject.value);
            if (t->object.kind == TermKind::Variable && is_cvt_name(t->object.value))
                cvt.insert(t->object.value);
        }
        if (t->object.kind == TermKind::Variable &&
            catalog.explicit_ids.count(t->predicate.value))
            cvt.insert(t->object.value);
    }
    return cvt;
}

StatementTemplate normalize_template(const RawStatement& raw) {
    StatementTemplate out;
    std::map<std::string, Term> subst;

    if (raw.modifier) {
        ModifierSpec m = *raw.modifier;
        out.binding_example["?entity1"] = m.sort_var;
        m.sort_var = sparql::make_var("?entity1");
        out.modifier = m;
        out.structure_type = StructureType::Modifier;
        out.anchor_roles = {"?entity1"};
        out.id = fnv1a64_hex("Modifier\n" + modifier_text(m));
        return out;
    }

    std::set<std::string> cvt_vars = raw.cvt_vars;
    for (const auto& v : union_local_vars(raw.elements)) cvt_vars.insert(v);

    std::vector<Term> endpoints = endpoint_terms(raw.elements, cvt_vars);
    bool has_context = !raw.context.empty();

    if (endpoints.size() > 3)
        throw PlaceholderOverflow("statement has " + std::to_string(endpoints.size()) +
                                  " non-CVT endpoints");

    // Known endpoints anchor the statement; the remaining (new) endpoint takes
    // the highest placeholder, which the reconstructor later fills with the
    // step's assigned variable.
    auto is_known = [&](const Term& t) {
        return t.kind != TermKind::Variable || raw.known_terms.count(t.value) > 0;
    };
    std::vector<Term> ordered = endpoints;
    size_t unknown_count = 0;
    for (const auto& t : endpoints)
        if (!is_known(t)) ++unknown_count;
    if (unknown_count == 1 && endpoints.size() > 1) {
        std::stable_partition(ordered.begin(), ordered.end(), is_known);
    }

    std::vector<std::string> roles;
    if (has_context) {
        // chain context already owns ?entity1/?entity2
        roles = {"?entity3"};
        if (ordered.size() > 1)
            throw PlaceholderOverflow("CVT auxiliary statement with multiple endpoints");
    } else {
        for (size_t i = 0; i < ordered.size(); ++i)
            roles.push_back("?entity" + std::to_string(i + 1));
    }
    for (size_t i = 0; i < ordered.size(); ++i) {
        subst[ordered[i].kind == TermKind::Variable ? ordered[i].value
                                                    : term_key(ordered[i])] = Term{};
    }
    subst.clear();
    for (size_t i = 0; i < ordered.size(); ++i) {
        Term placeholder = sparql::make_var(roles[i]);
        out.binding_example[roles[i]] = ordered[i];
        if (ordered[i].kind == TermKind::Variable) subst[ordered[i].value] = placeholder;
    }
    for (const auto& v : cvt_vars) {
        subst[v] = sparql::make_var("?cvt");
        out.binding_example["?cvt"] = sparql::make_var(v);
    }

    // grounded endpoints are replaced positionally, not by name
    auto replace_grounded = [&](const PatternElement& e) {
        PatternElement elem = e;
        std::function<void(PatternElement&)> walk = [&](PatternElement& pe) {
            if (pe.is_triple()) {
                auto t = pe.triple();
                for (size_t i = 0; i < ordered.size(); ++i) {
                    if (ordered[i].kind == TermKind::Variable) continue;
                    if (t.subject == ordered[i]) t.subject = sparql::make_var(roles[i]);
                    if (t.object == ordered[i]) t.object = sparql::make_var(roles[i]);
                }
                pe = sparql::element(t);
            } else if (pe.is_filter()) {
                auto f = pe.filter();
                for (size_t i = 0; i < ordered.size(); ++i) {
                    if (ordered[i].kind == TermKind::Variable) continue;
                    if (f.target == ordered[i]) f.target = sparql::make_var(roles[i]);
                }
                pe = sparql::element(f);
            } else {
                sparql::UnionExpr u = pe.union_expr();
                for (auto& b : u.branches)
                    for (auto& be : b) walk(be);
                pe = sparql::element(std::move(u));
            }
        };
        walk(elem);
        return elem;
    };

    for (const auto& e : raw.elements)
        out.elements.push_back(substitute_element(replace_grounded(e), subst));
    out.context_elements = raw.context;

    std::vector<const TriplePattern*> triples;
    collect_triples(out.elements, triples);
    for (const auto* t : triples) out.relation_labels.push_back(t->predicate.value);

    for (size_t i = 0; i < ordered.size(); ++i)
        if (is_known(ordered[i])) out.anchor_roles.push_back(roles[i]);
    if (out.anchor_roles.empty() && !roles.empty()) out.anchor_roles.push_back(roles.front());

    out.structure_type = classify_structure(out);
    out.id = fnv1a64_hex(structure_type_name(out.structure_type) + "\n" +
                         serialize_elements(out.elements) + "|ctx|" +
                         serialize_elements(out.context_elements));
    return out;
}

StructureType classify_structure(const StatementTemplate& stmt) {
    if (stmt.modifier) return StructureType::Modifier;
    if (stmt.elements.size() == 1 && stmt.elements[0].is_filter()) return StructureType::Filter;
    for (const auto& e : stmt.elements)
        if (e.is_union()) return StructureType::S1;

    std::vector<const TriplePattern*> triples;
    collect_triples(stmt.elements, triples);
    auto touches_cvt = [](const TriplePattern& t) {
        return (t.subject.kind == TermKind::Variable && is_cvt_name(t.subject.value)) ||
               (t.object.kind == TermKind::Variable && is_cvt_name(t.object.value));
    };
    size_t cvt_incident = 0;
    for (const auto* t : triples)
        if (touches_cvt(*t)) ++cvt_incident;

    if (triples.size() == 1) return cvt_incident ? StructureType::CvtAux : StructureType::S1;
    if (triples.size() == 2 && cvt_incident == 2) return StructureType::S2;
    if (triples.size() == 3 && cvt_incident == 3) return StructureType::S3;
    return StructureType::S1;
}

DecompositionResult decompose(const SparqlQuery& q, const CvtCatalog& catalog,
                              const std::string& query_id) {
    DecompositionResult result;
    result.source_query_id = query_id;

    std::set<std::string> cvt_vars = detect_cvt_nodes(q, catalog);

    // Emission units in source order. CVT groups sort at their first edge.
    struct Unit {
        size_t seq;
        RawStatement raw;
    };
    std::vector<Unit> units;

    struct IndexedTriple {
        size_t index;
        TriplePattern triple;
    };
    std::map<std::string, std::vector<IndexedTriple>> cvt_groups;
    std::vector<std::string> cvt_order;
    std::map<std::string, size_t> cvt_first_seq;

    size_t triple_index = 0;
    size_t seq = 0;
    for (const auto& e : q.where) {
        ++seq;
        if (e.is_triple()) {
            const auto& t = e.triple();
            std::string cvt;
            if (t.subject.kind == TermKind::Variable && cvt_vars.count(t.subject.value))
                cvt = t.subject.value;
            else if (t.object.kind == TermKind::Variable && cvt_vars.count(t.object.value))
                cvt = t.object.value;
            if (!cvt.empty()) {
                if (!cvt_groups.count(cvt)) {
                    cvt_order.push_back(cvt);
                    cvt_first_seq[cvt] = seq;
                }
                cvt_groups[cvt].push_back({triple_index, t});
            } else {
                RawStatement raw;
                raw.elements = {e};
                raw.triple_indices = {triple_index};
                units.push_back({seq, std::move(raw)});
            }
            ++triple_index;
        } else if (e.is_union()) {
            RawStatement raw;
            raw.elements = {e};
            raw.cvt_vars = cvt_vars;
            std::vector<const TriplePattern*> ts;
            collect_triples(raw.elements, ts);
            for (size_t i = 0; i < ts.size(); ++i) raw.triple_indices.push_back(triple_index++);
            units.push_back({seq, std::move(raw)});
        } else {
            const auto& f = e.filter();
            if (is_boilerplate_filter(f)) continue;
            RawStatement raw;
            raw.elements = {e};
            units.push_back({seq, std::move(raw)});
        }
    }

    for (const auto& cvt : cvt_order) {
        auto& edges = cvt_groups[cvt];
        size_t base_seq = cvt_first_seq[cvt];
        if (edges.size() >= 3) {
            std::array<std::string, 3> rels = {edges[0].triple.predicate.value,
                                               edges[1].triple.predicate.value,
                                               edges[2].triple.predicate.value};
            if (edges.size() == 3 && catalog.is_joint_group(rels)) {
                RawStatement raw;
                for (const auto& it : edges) {
                    raw.elements.push_back(sparql::element(it.triple));
                    raw.triple_indices.push_back(it.index);
                }
                raw.cvt_vars = {cvt};
                units.push_back({base_seq, std::move(raw)});
                continue;
            }
        }
        if (edges.size() == 1) {
            result.diagnostics.push_back("DanglingCvt: " + cvt + " has a single incident edge");
            RawStatement raw;
            raw.elements = {sparql::element(edges[0].triple)};
            raw.triple_indices = {edges[0].index};
            raw.cvt_vars = {cvt};
            units.push_back({base_seq, std::move(raw)});
            continue;
        }
        RawStatement chain;
        chain.elements = {sparql::element(edges[0].triple), sparql::element(edges[1].triple)};
        chain.triple_indices = {edges[0].index, edges[1].index};
        chain.cvt_vars = {cvt};
        units.push_back({base_seq, std::move(chain)});
        for (size_t i = 2; i < edges.size(); ++i) {
            RawStatement aux;
            aux.elements = {sparql::element(edges[i].triple)};
            aux.triple_indices = {edges[i].index};
            aux.cvt_vars = {cvt};
            aux.context = {};  // filled after the chain is normalized
            units.push_back({base_seq, std::move(aux)});
        }
    }

    if (q.order_by || q.limit) {
        RawStatement raw;
        ModifierSpec m;
        if (q.order_by) {
            m.sort_var = q.order_by->variable;
            m.direction = q.order_by->direction;
        }
        m.limit = q.limit;
        raw.modifier = m;
        units.push_back({seq + 1, std::move(raw)});
    }

    std::stable_sort(units.begin(), units.end(),
                     [](const Unit& a, const Unit& b) { return a.seq < b.seq; });

    // Thread the known set through the statements in order so anchors land on
    // ?entity1. The normalized S2 chain for each CVT becomes the context of
    // its auxiliary fragments.
    std::set<std::string> known;
    std::map<std::string, const StatementTemplate*> chain_by_cvt;
    for (auto& unit : units) {
        unit.raw.known_terms = known;
        if (!unit.raw.context.empty() || unit.raw.modifier || unit.raw.cvt_vars.empty()) {
            // context assignment below only applies to aux statements
        }
        bool is_aux_candidate = false;
        if (!unit.raw.modifier && unit.raw.cvt_vars.size() == 1 &&
            unit.raw.elements.size() == 1 && unit.raw.elements[0].is_triple()) {
            const auto& cvt = *unit.raw.cvt_vars.begin();
            auto it = chain_by_cvt.find(cvt);
            if (it != chain_by_cvt.end()) {
                unit.raw.context = it->second->elements;
                is_aux_candidate = true;
            }
        }
        StatementTemplate stmt = normalize_template(unit.raw);
        (void)is_aux_candidate;
        for (const auto& [role, term] : stmt.binding_example)
            if (term.kind == TermKind::Variable && role != "?cvt") known.insert(term.value);
        if (stmt.structure_type == StructureType::S2 && unit.raw.cvt_vars.size() == 1)
            chain_by_cvt[*unit.raw.cvt_vars.begin()] =
                &result.statements.emplace_back(std::move(stmt));
        else
            result.statements.push_back(std::move(stmt));
        if (!unit.raw.triple_indices.empty())
            result.coverage[result.statements.back().id] = unit.raw.triple_indices;
    }

    return result;
}

} // namespace memq::decomp
