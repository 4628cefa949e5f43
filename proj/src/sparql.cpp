#include "memq/sparql.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace memq::sparql {

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_local_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

// Constructs outside the dialect. Matched case-insensitively against bare
// identifiers so corpus surprises fail loudly instead of being dropped.
const std::set<std::string>& unsupported_keywords() {
    static const std::set<std::string> kw = {
        "optional", "minus",    "graph",  "service", "bind",     "values",
        "group",    "having",   "offset", "exists",  "not",      "construct",
        "ask",      "describe", "insert", "delete",  "optional", "count",
        "sum",      "avg",      "min",    "max",     "sample",   "regex",
        "strstarts", "contains", "year",  "now",
    };
    return kw;
}

enum class TokKind {
    Eof,
    Identifier, // keywords, function names
    Curie,      // prefix:local
    Variable,   // ?name
    FullIri,    // <...>
    String,     // quoted literal (value unescaped)
    Integer,
    LangTag,    // @en
    LBrace, RBrace, LParen, RParen,
    Dot, Comma,
    Eq, Neq, Lt, Le, Gt, Ge,
    Bang, DoubleCaret,
};

struct Token {
    TokKind kind = TokKind::Eof;
    std::string text;
    size_t line = 1;
    size_t column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view input) : input_(input) {}

    Token next() {
        skip_ws();
        Token tok;
        tok.line = line_;
        tok.column = column_;
        if (pos_ >= input_.size()) {
            tok.kind = TokKind::Eof;
            return tok;
        }
        char c = input_[pos_];
        switch (c) {
        case '{': return punct(tok, TokKind::LBrace);
        case '}': return punct(tok, TokKind::RBrace);
        case '(': return punct(tok, TokKind::LParen);
        case ')': return punct(tok, TokKind::RParen);
        case '.': return punct(tok, TokKind::Dot);
        case ',': return punct(tok, TokKind::Comma);
        case '=': return punct(tok, TokKind::Eq);
        case '!':
            if (peek(1) == '=') { advance(); advance(); tok.kind = TokKind::Neq; tok.text = "!="; return tok; }
            return punct(tok, TokKind::Bang);
        case '<':
            // '<' begins a full IRI unless followed by '=' or whitespace
            if (peek(1) == '=') { advance(); advance(); tok.kind = TokKind::Le; tok.text = "<="; return tok; }
            if (peek(1) == ' ' || peek(1) == '\t') return punct(tok, TokKind::Lt);
            return lex_iri(tok);
        case '>':
            if (peek(1) == '=') { advance(); advance(); tok.kind = TokKind::Ge; tok.text = ">="; return tok; }
            return punct(tok, TokKind::Gt);
        case '^':
            if (peek(1) == '^') { advance(); advance(); tok.kind = TokKind::DoubleCaret; tok.text = "^^"; return tok; }
            throw ParseError("unexpected '^'", line_, column_);
        case '?':
        case '$':
            return lex_variable(tok);
        case '"':
        case '\'':
            return lex_string(tok, c);
        case '@':
            return lex_lang(tok);
        default:
            break;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) return lex_integer(tok);
        if (is_ident_start(c)) return lex_word(tok);
        throw ParseError(std::string("unexpected character '") + c + "'", line_, column_);
    }

private:
    char peek(size_t off = 0) const {
        return pos_ + off < input_.size() ? input_[pos_ + off] : '\0';
    }

    void advance() {
        if (pos_ < input_.size()) {
            if (input_[pos_] == '\n') { ++line_; column_ = 1; }
            else ++column_;
            ++pos_;
        }
    }

    void skip_ws() {
        while (pos_ < input_.size()) {
            char c = input_[pos_];
            if (c == '#') {
                while (pos_ < input_.size() && input_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    Token punct(Token tok, TokKind kind) {
        tok.kind = kind;
        tok.text = std::string(1, input_[pos_]);
        advance();
        return tok;
    }

    Token lex_iri(Token tok) {
        advance(); // consume '<'
        std::string value;
        while (pos_ < input_.size() && input_[pos_] != '>') {
            value += input_[pos_];
            advance();
        }
        if (pos_ >= input_.size()) throw ParseError("unterminated IRI", tok.line, tok.column);
        advance(); // consume '>'
        tok.kind = TokKind::FullIri;
        tok.text = value;
        return tok;
    }

    Token lex_variable(Token tok) {
        advance(); // consume '?'
        std::string name;
        if (pos_ >= input_.size() || !is_ident_start(input_[pos_]))
            throw ParseError("invalid variable name", tok.line, tok.column);
        while (pos_ < input_.size() && is_ident_char(input_[pos_])) {
            name += input_[pos_];
            advance();
        }
        tok.kind = TokKind::Variable;
        tok.text = "?" + name;
        return tok;
    }

    Token lex_string(Token tok, char quote) {
        advance();
        std::string value;
        while (pos_ < input_.size() && input_[pos_] != quote) {
            char c = input_[pos_];
            if (c == '\\') {
                advance();
                char esc = peek();
                switch (esc) {
                case 'n': value += '\n'; break;
                case 't': value += '\t'; break;
                case '\\': value += '\\'; break;
                case '"': value += '"'; break;
                case '\'': value += '\''; break;
                default: value += esc; break;
                }
                advance();
            } else {
                value += c;
                advance();
            }
        }
        if (pos_ >= input_.size()) throw ParseError("unterminated string literal", tok.line, tok.column);
        advance(); // closing quote
        tok.kind = TokKind::String;
        tok.text = value;
        return tok;
    }

    Token lex_lang(Token tok) {
        advance(); // '@'
        std::string tag;
        while (pos_ < input_.size() &&
               (std::isalnum(static_cast<unsigned char>(input_[pos_])) || input_[pos_] == '-')) {
            tag += input_[pos_];
            advance();
        }
        if (tag.empty()) throw ParseError("empty language tag", tok.line, tok.column);
        tok.kind = TokKind::LangTag;
        tok.text = tag;
        return tok;
    }

    Token lex_integer(Token tok) {
        std::string digits;
        while (pos_ < input_.size() && std::isdigit(static_cast<unsigned char>(input_[pos_]))) {
            digits += input_[pos_];
            advance();
        }
        tok.kind = TokKind::Integer;
        tok.text = digits;
        return tok;
    }

    // Bare word or curie. A ':' right after the word turns it into a curie
    // whose local part may contain dots (Freebase relation ids).
    Token lex_word(Token tok) {
        std::string word;
        while (pos_ < input_.size() && (is_ident_char(input_[pos_]) || input_[pos_] == '-')) {
            word += input_[pos_];
            advance();
        }
        if (peek() == ':') {
            advance();
            std::string local;
            while (pos_ < input_.size()) {
                char c = input_[pos_];
                if (is_local_char(c)) {
                    local += c;
                    advance();
                } else if (c == '.' && is_local_char(peek(1))) {
                    // dots stay inside the token only when followed by more
                    // local characters, so a trailing '.' terminates a triple
                    local += c;
                    advance();
                } else {
                    break;
                }
            }
            tok.kind = TokKind::Curie;
            tok.text = word + ":" + local;
            return tok;
        }
        tok.kind = TokKind::Identifier;
        tok.text = word;
        return tok;
    }

    std::string_view input_;
    size_t pos_ = 0;
    size_t line_ = 1;
    size_t column_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view input) : lexer_(input) { shift(); }

    SparqlQuery parse() {
        SparqlQuery q;
        parse_prologue(q);
        expect_keyword("select");
        if (is_keyword("distinct")) {
            q.distinct = true;
            shift();
        }
        while (cur_.kind == TokKind::Variable) {
            q.select_vars.push_back(make_var(cur_.text));
            shift();
        }
        if (q.select_vars.empty()) {
            if (cur_.kind == TokKind::Identifier && lower(cur_.text) == "where")
                fail("expected at least one select variable");
            fail_unsupported_or("expected select variable");
        }
        expect_keyword("where");
        expect(TokKind::LBrace, "'{'");
        q.where = parse_group(TokKind::RBrace);
        expect(TokKind::RBrace, "'}'");
        parse_solution_modifiers(q);
        if (cur_.kind != TokKind::Eof) fail_unsupported_or("trailing content after query");
        check_invariants(q);
        return q;
    }

    FragmentResult parse_fragment_body() {
        FragmentResult f;
        if (is_keyword("order")) {
            parse_order_limit(f.order_by, f.limit);
        } else {
            f.elements = parse_group(TokKind::Eof);
            if (is_keyword("order") || is_keyword("limit")) {
                parse_order_limit(f.order_by, f.limit);
            }
        }
        if (cur_.kind != TokKind::Eof) fail_unsupported_or("trailing content after fragment");
        return f;
    }

private:
    void shift() { cur_ = lexer_.next(); }

    [[noreturn]] void fail(const std::string& msg) {
        std::string detail = msg;
        if (!cur_.text.empty()) detail += ", got '" + cur_.text + "'";
        throw ParseError(detail, cur_.line, cur_.column);
    }

    [[noreturn]] void fail_unsupported_or(const std::string& msg) {
        if (cur_.kind == TokKind::Identifier &&
            unsupported_keywords().count(lower(cur_.text))) {
            throw UnsupportedConstruct("unsupported construct '" + cur_.text + "' at line " +
                                       std::to_string(cur_.line));
        }
        fail(msg);
    }

    bool is_keyword(std::string_view kw) const {
        return cur_.kind == TokKind::Identifier && lower(cur_.text) == kw;
    }

    void expect_keyword(std::string_view kw) {
        if (!is_keyword(kw)) fail_unsupported_or("expected '" + std::string(kw) + "'");
        shift();
    }

    void expect(TokKind kind, const std::string& what) {
        if (cur_.kind != kind) fail_unsupported_or("expected " + what);
        shift();
    }

    void parse_prologue(SparqlQuery& q) {
        while (is_keyword("prefix")) {
            shift();
            if (cur_.kind != TokKind::Curie) fail("expected prefix declaration");
            auto colon = cur_.text.find(':');
            std::string prefix = cur_.text.substr(0, colon);
            if (cur_.text.size() > colon + 1) fail("expected ':' to end prefix name");
            shift();
            if (cur_.kind != TokKind::FullIri) fail("expected IRI in prefix declaration");
            q.prefixes.emplace_back(prefix, cur_.text);
            shift();
        }
    }

    std::vector<PatternElement> parse_group(TokKind terminator) {
        std::vector<PatternElement> elements;
        while (cur_.kind != terminator && cur_.kind != TokKind::Eof) {
            if (cur_.kind == TokKind::Dot) { shift(); continue; }
            if (is_keyword("filter")) {
                elements.push_back(element(parse_filter()));
            } else if (cur_.kind == TokKind::LBrace) {
                parse_union_or_group(elements);
            } else if (cur_.kind == TokKind::Curie || cur_.kind == TokKind::Variable ||
                       cur_.kind == TokKind::FullIri || cur_.kind == TokKind::String) {
                elements.push_back(element(parse_triple()));
            } else if (is_keyword("order") || is_keyword("limit")) {
                break;
            } else {
                fail_unsupported_or("expected triple, FILTER, UNION group or '}'");
            }
        }
        return elements;
    }

    // `{ g1 } UNION { g2 } ...`; a lone braced group is flattened into the
    // enclosing group.
    void parse_union_or_group(std::vector<PatternElement>& out) {
        std::vector<PatternGroup> branches;
        branches.push_back(parse_braced_group());
        while (is_keyword("union")) {
            shift();
            branches.push_back(parse_braced_group());
        }
        if (branches.size() == 1) {
            for (auto& e : branches[0]) out.push_back(std::move(e));
            return;
        }
        for (const auto& b : branches) {
            if (b.empty()) fail("empty UNION branch");
        }
        UnionExpr u;
        u.branches = std::move(branches);
        out.push_back(element(std::move(u)));
    }

    PatternGroup parse_braced_group() {
        expect(TokKind::LBrace, "'{'");
        PatternGroup g = parse_group(TokKind::RBrace);
        expect(TokKind::RBrace, "'}'");
        return g;
    }

    Term parse_term() {
        switch (cur_.kind) {
        case TokKind::Curie: {
            Term t = make_iri(cur_.text);
            shift();
            return t;
        }
        case TokKind::FullIri: {
            Term t = make_iri("<" + cur_.text + ">");
            shift();
            return t;
        }
        case TokKind::Variable: {
            Term t = make_var(cur_.text);
            shift();
            return t;
        }
        case TokKind::String: {
            std::string lexical = cur_.text;
            shift();
            std::string lang, datatype;
            if (cur_.kind == TokKind::LangTag) {
                lang = cur_.text;
                shift();
            } else if (cur_.kind == TokKind::DoubleCaret) {
                shift();
                if (cur_.kind != TokKind::Curie && cur_.kind != TokKind::FullIri)
                    fail("expected datatype after '^^'");
                datatype = cur_.kind == TokKind::FullIri ? "<" + cur_.text + ">" : cur_.text;
                shift();
            }
            return make_literal(lexical, lang, datatype);
        }
        case TokKind::Integer: {
            Term t = make_literal(cur_.text);
            shift();
            return t;
        }
        default:
            fail_unsupported_or("expected term");
        }
    }

    TriplePattern parse_triple() {
        TriplePattern t;
        t.subject = parse_term();
        if (cur_.kind != TokKind::Curie && cur_.kind != TokKind::FullIri)
            fail_unsupported_or("expected IRI predicate");
        t.predicate = parse_term();
        t.object = parse_term();
        if (cur_.kind == TokKind::Dot) shift();
        return t;
    }

    FilterExpr parse_filter() {
        shift(); // FILTER
        expect(TokKind::LParen, "'(' after FILTER");
        FilterExpr f;
        if (cur_.kind == TokKind::Bang) {
            f = parse_lang_boilerplate();
        } else if (cur_.kind == TokKind::Curie &&
                   (lower(cur_.text) == "xsd:datetime" || lower(cur_.text) == "xsd:date")) {
            // xsd:datetime(?v) <op> literal
            shift();
            expect(TokKind::LParen, "'(' after datetime cast");
            if (cur_.kind != TokKind::Variable) fail("expected variable in datetime cast");
            f.target = make_var(cur_.text);
            shift();
            expect(TokKind::RParen, "')'");
            f.kind = FilterKind::Comparison;
            f.datetime_cast = true;
            f.op = parse_compare_op();
            f.value = parse_term();
        } else if (cur_.kind == TokKind::Variable) {
            f.target = make_var(cur_.text);
            shift();
            switch (cur_.kind) {
            case TokKind::Eq:
                f.kind = FilterKind::Equality;
                shift();
                f.value = parse_term();
                break;
            case TokKind::Neq:
                f.kind = FilterKind::Inequality;
                shift();
                f.value = parse_term();
                break;
            case TokKind::Lt: case TokKind::Le: case TokKind::Gt: case TokKind::Ge:
                f.kind = FilterKind::Comparison;
                f.op = parse_compare_op();
                f.value = parse_term();
                break;
            default:
                fail_unsupported_or("expected comparison operator in FILTER");
            }
        } else {
            fail_unsupported_or("unsupported FILTER expression");
        }
        expect(TokKind::RParen, "')' to close FILTER");
        if (cur_.kind == TokKind::Dot) shift();
        return f;
    }

    CompareOp parse_compare_op() {
        CompareOp op;
        switch (cur_.kind) {
        case TokKind::Lt: op = CompareOp::Less; break;
        case TokKind::Le: op = CompareOp::LessEq; break;
        case TokKind::Gt: op = CompareOp::Greater; break;
        case TokKind::Ge: op = CompareOp::GreaterEq; break;
        default: fail("expected comparison operator");
        }
        shift();
        return op;
    }

    // !isLiteral(?x) OR lang(?x) = '' OR langMatches(lang(?x), 'en')
    FilterExpr parse_lang_boilerplate() {
        expect(TokKind::Bang, "'!'");
        if (!is_keyword("isliteral")) fail("expected isLiteral");
        shift();
        expect(TokKind::LParen, "'('");
        if (cur_.kind != TokKind::Variable) fail("expected variable");
        FilterExpr f;
        f.kind = FilterKind::LangBoilerplate;
        f.target = make_var(cur_.text);
        shift();
        expect(TokKind::RParen, "')'");
        expect_keyword("or");
        expect_keyword("lang");
        expect(TokKind::LParen, "'('");
        expect(TokKind::Variable, "variable");
        expect(TokKind::RParen, "')'");
        expect(TokKind::Eq, "'='");
        expect(TokKind::String, "''");
        expect_keyword("or");
        expect_keyword("langmatches");
        expect(TokKind::LParen, "'('");
        expect_keyword("lang");
        expect(TokKind::LParen, "'('");
        expect(TokKind::Variable, "variable");
        expect(TokKind::RParen, "')'");
        expect(TokKind::Comma, "','");
        expect(TokKind::String, "language");
        expect(TokKind::RParen, "')'");
        return f;
    }

    void parse_solution_modifiers(SparqlQuery& q) {
        parse_order_limit(q.order_by, q.limit);
    }

    void parse_order_limit(std::optional<OrderSpec>& order_by, std::optional<long>& limit) {
        if (is_keyword("order")) {
            shift();
            expect_keyword("by");
            OrderSpec spec;
            if (is_keyword("desc") || is_keyword("asc")) {
                spec.direction = lower(cur_.text) == "desc" ? SortDirection::Desc : SortDirection::Asc;
                shift();
                expect(TokKind::LParen, "'('");
                if (cur_.kind != TokKind::Variable) fail("expected variable in ORDER BY");
                spec.variable = make_var(cur_.text);
                shift();
                expect(TokKind::RParen, "')'");
            } else if (cur_.kind == TokKind::Variable) {
                spec.variable = make_var(cur_.text);
                spec.direction = SortDirection::Asc;
                shift();
            } else {
                fail_unsupported_or("expected ORDER BY key");
            }
            order_by = spec;
        }
        if (is_keyword("limit")) {
            shift();
            if (cur_.kind != TokKind::Integer) fail("expected integer after LIMIT");
            long n = std::stol(cur_.text);
            if (n <= 0) fail("LIMIT must be positive");
            limit = n;
            shift();
        }
    }

    void check_invariants(const SparqlQuery& q) {
        auto vars = collect_variables(q.where);
        std::set<std::string> in_where(vars.begin(), vars.end());
        for (const auto& v : q.select_vars) {
            if (!in_where.count(v.value))
                throw ParseError("select variable " + v.value + " does not appear in WHERE",
                                 1, 1);
        }
        if (q.limit && q.where.empty())
            throw ParseError("LIMIT without graph pattern", 1, 1);
        if (q.order_by) {
            std::set<std::string> all = in_where;
            if (!all.count(q.order_by->variable.value))
                throw ParseError("ORDER BY variable " + q.order_by->variable.value +
                                 " does not appear in WHERE", 1, 1);
        }
    }

    Lexer lexer_;
    Token cur_;
};

void walk_variables(const std::vector<PatternElement>& elements,
                    std::vector<std::string>& order, std::set<std::string>& seen) {
    auto visit_term = [&](const Term& t) {
        if (t.kind == TermKind::Variable && !seen.count(t.value)) {
            seen.insert(t.value);
            order.push_back(t.value);
        }
    };
    for (const auto& e : elements) {
        if (e.is_triple()) {
            visit_term(e.triple().subject);
            visit_term(e.triple().object);
        } else if (e.is_filter()) {
            visit_term(e.filter().target);
            visit_term(e.filter().value);
        } else {
            for (const auto& b : e.union_expr().branches) walk_variables(b, order, seen);
        }
    }
}

std::string escape_literal(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c; break;
        }
    }
    return out;
}

std::string compare_op_text(CompareOp op) {
    switch (op) {
    case CompareOp::Less: return "<";
    case CompareOp::LessEq: return "<=";
    case CompareOp::Greater: return ">";
    case CompareOp::GreaterEq: return ">=";
    }
    return "<";
}

std::string serialize_group_inline(const PatternGroup& g) {
    std::string out;
    for (size_t i = 0; i < g.size(); ++i) {
        if (i) out += " ";
        out += serialize_element(g[i]);
    }
    return out;
}

Term rename_term(const Term& t, const std::map<std::string, std::string>& renames) {
    if (t.kind != TermKind::Variable) return t;
    auto it = renames.find(t.value);
    return it == renames.end() ? t : make_var(it->second);
}

PatternElement rename_element(const PatternElement& e,
                              const std::map<std::string, std::string>& renames) {
    if (e.is_triple()) {
        TriplePattern t = e.triple();
        t.subject = rename_term(t.subject, renames);
        t.object = rename_term(t.object, renames);
        return element(t);
    }
    if (e.is_filter()) {
        FilterExpr f = e.filter();
        f.target = rename_term(f.target, renames);
        f.value = rename_term(f.value, renames);
        return element(f);
    }
    UnionExpr u;
    for (const auto& b : e.union_expr().branches) {
        PatternGroup g;
        for (const auto& be : b) g.push_back(rename_element(be, renames));
        u.branches.push_back(std::move(g));
    }
    return element(std::move(u));
}

} // namespace

bool UnionExpr::operator==(const UnionExpr& other) const {
    return branches == other.branches;
}

Term make_iri(std::string curie) {
    Term t;
    t.kind = TermKind::Iri;
    t.value = std::move(curie);
    return t;
}

Term make_var(std::string name) {
    if (!is_valid_variable_name(name))
        throw Error("invalid variable name: " + name);
    Term t;
    t.kind = TermKind::Variable;
    t.value = std::move(name);
    return t;
}

Term make_literal(std::string lexical, std::string lang, std::string datatype) {
    Term t;
    t.kind = TermKind::Literal;
    t.value = std::move(lexical);
    t.lang = std::move(lang);
    t.datatype = std::move(datatype);
    return t;
}

bool is_valid_variable_name(std::string_view name) {
    if (name.size() < 2 || name[0] != '?') return false;
    if (!is_ident_start(name[1])) return false;
    for (size_t i = 2; i < name.size(); ++i)
        if (!is_ident_char(name[i])) return false;
    return true;
}

PatternElement element(TriplePattern t) { return PatternElement{std::move(t)}; }
PatternElement element(FilterExpr f) { return PatternElement{std::move(f)}; }
PatternElement element(UnionExpr u) { return PatternElement{std::move(u)}; }

const std::vector<std::pair<std::string, std::string>>& default_prefixes() {
    static const std::vector<std::pair<std::string, std::string>> p = {
        {"ns", "http://rdf.freebase.com/ns/"},
        {"xsd", "http://www.w3.org/2001/XMLSchema#"},
    };
    return p;
}

SparqlQuery parse_query(std::string_view text) {
    Parser parser(text);
    return parser.parse();
}

FragmentResult parse_fragment(std::string_view text) {
    Parser parser(text);
    return parser.parse_fragment_body();
}

std::string serialize_term(const Term& t) {
    switch (t.kind) {
    case TermKind::Iri:
    case TermKind::Variable:
        return t.value;
    case TermKind::Literal: {
        std::string out = "\"" + escape_literal(t.value) + "\"";
        if (!t.lang.empty()) out += "@" + t.lang;
        else if (!t.datatype.empty()) out += "^^" + t.datatype;
        return out;
    }
    }
    return t.value;
}

std::string serialize_element(const PatternElement& e) {
    if (e.is_triple()) {
        const auto& t = e.triple();
        return serialize_term(t.subject) + " " + serialize_term(t.predicate) + " " +
               serialize_term(t.object);
    }
    if (e.is_filter()) {
        const auto& f = e.filter();
        switch (f.kind) {
        case FilterKind::Equality:
            return "FILTER(" + f.target.value + " = " + serialize_term(f.value) + ")";
        case FilterKind::Inequality:
            return "FILTER(" + f.target.value + " != " + serialize_term(f.value) + ")";
        case FilterKind::LangBoilerplate:
            return "FILTER (!isLiteral(" + f.target.value + ") OR lang(" + f.target.value +
                   ") = '' OR langMatches(lang(" + f.target.value + "), 'en'))";
        case FilterKind::Comparison: {
            std::string lhs = f.datetime_cast ? "xsd:datetime(" + f.target.value + ")"
                                              : f.target.value;
            return "FILTER(" + lhs + " " + compare_op_text(f.op) + " " +
                   serialize_term(f.value) + ")";
        }
        }
    }
    const auto& u = e.union_expr();
    std::string out;
    for (size_t i = 0; i < u.branches.size(); ++i) {
        if (i) out += " UNION ";
        out += "{ " + serialize_group_inline(u.branches[i]) + " }";
    }
    return out;
}

std::string serialize_query(const SparqlQuery& q) {
    std::ostringstream out;
    for (const auto& [prefix, iri] : q.prefixes)
        out << "PREFIX " << prefix << ": <" << iri << ">\n";
    out << "SELECT ";
    if (q.distinct) out << "DISTINCT ";
    for (const auto& v : q.select_vars) out << v.value << " ";
    out << "WHERE {\n";
    for (const auto& e : q.where) out << serialize_element(e) << " .\n";
    out << "}";
    if (q.order_by) {
        out << "\nORDER BY ";
        if (q.order_by->direction == SortDirection::Desc)
            out << "DESC(" << q.order_by->variable.value << ")";
        else
            out << q.order_by->variable.value;
    }
    if (q.limit) out << (q.order_by ? " " : "\n") << "LIMIT " << *q.limit;
    out << "\n";
    return out.str();
}

std::vector<std::string> collect_variables(const std::vector<PatternElement>& elements) {
    std::vector<std::string> order;
    std::set<std::string> seen;
    walk_variables(elements, order, seen);
    return order;
}

std::vector<std::string> collect_variables(const SparqlQuery& q) {
    std::vector<std::string> order;
    std::set<std::string> seen;
    walk_variables(q.where, order, seen);
    if (q.order_by && !seen.count(q.order_by->variable.value)) {
        seen.insert(q.order_by->variable.value);
        order.push_back(q.order_by->variable.value);
    }
    for (const auto& v : q.select_vars) {
        if (!seen.count(v.value)) {
            seen.insert(v.value);
            order.push_back(v.value);
        }
    }
    return order;
}

SparqlQuery canonicalize_variables(const SparqlQuery& q, const std::set<std::string>& keep) {
    std::map<std::string, std::string> renames;
    size_t counter = 0;
    for (const auto& name : collect_variables(q)) {
        if (keep.count(name)) continue;
        std::string fresh;
        do {
            fresh = "?v" + std::to_string(counter++);
        } while (keep.count(fresh));
        renames[name] = fresh;
    }
    SparqlQuery out = q;
    out.where.clear();
    for (const auto& e : q.where) out.where.push_back(rename_element(e, renames));
    for (auto& v : out.select_vars) v = rename_term(v, renames);
    if (out.order_by) out.order_by->variable = rename_term(out.order_by->variable, renames);
    return out;
}

std::string expand_curie(const std::string& curie,
                         const std::vector<std::pair<std::string, std::string>>& prefixes) {
    auto colon = curie.find(':');
    if (colon == std::string::npos || (!curie.empty() && curie.front() == '<')) return curie;
    std::string prefix = curie.substr(0, colon);
    for (const auto& [p, base] : prefixes)
        if (p == prefix) return base + curie.substr(colon + 1);
    return curie;
}

std::string compact_iri(const std::string& full_iri,
                        const std::vector<std::pair<std::string, std::string>>& prefixes) {
    for (const auto& [p, base] : prefixes) {
        if (full_iri.rfind(base, 0) == 0)
            return p + ":" + full_iri.substr(base.size());
    }
    return "<" + full_iri + ">";
}

} // namespace memq::sparql
