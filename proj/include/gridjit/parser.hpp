// SPDX-License-Identifier: Apache-2.0
//
// Kernel source parser. Hand-written lexer + recursive descent over the
// grammar in docs/grammar.md (the EBNF there is normative). Parsing also
// runs the structural validation passes: name uniqueness, store-target
// legality, intrinsic name/arity checks, and definite assignment, so every
// KernelAst this returns satisfies the AST invariants.
#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gridjit/ast.hpp"
#include "gridjit/errors.hpp"
#include "gridjit/intrinsics.hpp"

namespace gridjit {

namespace detail {

enum class TokKind : std::uint8_t { Ident, Keyword, IntLit, FloatLit, Punct, End };

struct Token {
    TokKind kind = TokKind::End;
    std::string text;
    std::uint64_t int_value = 0;  // magnitude; sign is applied by unary folding
    double float_value = 0.0;
    int line = 1;
    int column = 1;
};

inline bool is_keyword(std::string_view s) {
    return s == "kernel" || s == "shared" || s == "if" || s == "else" || s == "while" || s == "return" ||
           s == "i32" || s == "i64" || s == "f32" || s == "f64";
}

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

  private:
    void advance() {
        skip_ws_and_comments();
        tok_ = Token{};
        tok_.line = line_;
        tok_.column = column_;
        if (pos_ >= src_.size()) {
            tok_.kind = TokKind::End;
            return;
        }
        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                take();
            tok_.text = std::string(src_.substr(start, pos_ - start));
            tok_.kind = is_keyword(tok_.text) ? TokKind::Keyword : TokKind::Ident;
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < src_.size() &&
                                                            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            lex_number();
            return;
        }
        lex_punct();
    }

    void lex_number() {
        std::size_t start = pos_;
        bool is_float = false;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) take();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            is_float = true;
            take();
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) take();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_;
            take();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) take();
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                is_float = true;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) take();
            } else {
                // Not an exponent after all ("1e" followed by junk): back off.
                column_ -= static_cast<int>(pos_ - mark);
                pos_ = mark;
            }
        }
        tok_.text = std::string(src_.substr(start, pos_ - start));
        if (is_float) {
            tok_.kind = TokKind::FloatLit;
            const char* first = tok_.text.data();
            const char* last = first + tok_.text.size();
            auto [p, ec] = std::from_chars(first, last, tok_.float_value);
            if (ec != std::errc() || p != last)
                throw SyntaxError(tok_.line, tok_.column, "float literal out of range '" + tok_.text + "'");
            if (!std::isfinite(tok_.float_value))
                throw SyntaxError(tok_.line, tok_.column, "float literal out of range '" + tok_.text + "'");
        } else {
            tok_.kind = TokKind::IntLit;
            std::uint64_t v = 0;
            for (char d : tok_.text) {
                std::uint64_t digit = static_cast<std::uint64_t>(d - '0');
                if (v > (std::numeric_limits<std::uint64_t>::max() - digit) / 10)
                    throw SyntaxError(tok_.line, tok_.column, "integer literal out of range '" + tok_.text + "'");
                v = v * 10 + digit;
            }
            tok_.int_value = v;
        }
    }

    void lex_punct() {
        static constexpr std::string_view two_char[] = {"==", "!=", "<=", ">=", "&&", "||"};
        for (auto p : two_char) {
            if (src_.substr(pos_).starts_with(p)) {
                tok_.kind = TokKind::Punct;
                tok_.text = std::string(p);
                take();
                take();
                return;
            }
        }
        char c = src_[pos_];
        static constexpr std::string_view singles = "(){}[];,=+-*/%<>!";
        if (singles.find(c) == std::string_view::npos)
            throw SyntaxError(line_, column_, std::string("unexpected character '") + c + "'");
        tok_.kind = TokKind::Punct;
        tok_.text = std::string(1, c);
        take();
    }

    void skip_ws_and_comments() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') take();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                take();
            } else {
                break;
            }
        }
    }

    void take() {
        if (src_[pos_] == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        ++pos_;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
    Token tok_;
};

class Parser {
  public:
    explicit Parser(std::string_view src) : lex_(src) {}

    std::vector<KernelAst> parse_file() {
        std::vector<KernelAst> kernels;
        std::set<std::string> names;
        while (lex_.peek().kind != TokKind::End) {
            KernelAst k = parse_kernel();
            if (!names.insert(k.name).second) throw DuplicateName(lex_.peek().line, k.name);
            kernels.push_back(std::move(k));
        }
        return kernels;
    }

  private:
    KernelAst parse_kernel() {
        expect_keyword("kernel");
        KernelAst k;
        Token name = expect(TokKind::Ident, "kernel name");
        k.name = name.text;
        expect_punct("(");
        std::set<std::string> decl_names;
        if (!peek_punct(")")) {
            while (true) {
                Token p = expect(TokKind::Ident, "parameter name");
                if (!decl_names.insert(p.text).second) throw DuplicateName(p.line, p.text);
                k.params.push_back(p.text);
                if (peek_punct(",")) {
                    lex_.next();
                    continue;
                }
                break;
            }
        }
        expect_punct(")");
        expect_punct("{");
        while (peek_keyword("shared")) {
            SharedDecl d = parse_shared_decl();
            if (!decl_names.insert(d.name).second) throw DuplicateName(lex_.peek().line, d.name);
            k.shared_decls.push_back(d);
        }
        while (!peek_punct("}")) k.body.push_back(parse_stmt());
        expect_punct("}");

        validate(k);
        k.renumber_exprs();
        return k;
    }

    SharedDecl parse_shared_decl() {
        expect_keyword("shared");
        SharedDecl d;
        d.name = expect(TokKind::Ident, "shared array name").text;
        expect_punct("[");
        Token ty = lex_.next();
        if (ty.kind != TokKind::Keyword || !scalar_keyword(ty.text, d.elem))
            throw SyntaxError(ty.line, ty.column, "expected element type (i32/i64/f32/f64)");
        if (d.elem == ScalarType::Pred)
            throw SyntaxError(ty.line, ty.column, "shared arrays cannot hold predicates");
        expect_punct(";");
        Token n = expect(TokKind::IntLit, "element count");
        if (n.int_value == 0 || n.int_value > std::numeric_limits<std::uint32_t>::max())
            throw SyntaxError(n.line, n.column, "shared element count out of range");
        d.count = static_cast<std::uint32_t>(n.int_value);
        expect_punct("]");
        expect_punct(";");
        return d;
    }

    Stmt parse_stmt() {
        const Token& t = lex_.peek();
        if (t.kind == TokKind::Keyword) {
            if (t.text == "if") return parse_if();
            if (t.text == "while") return parse_while();
            if (t.text == "return") {
                Stmt s = Stmt::return_();
                s.line = t.line;
                lex_.next();
                expect_punct(";");
                return s;
            }
            throw SyntaxError(t.line, t.column, "unexpected keyword '" + t.text + "'");
        }
        if (t.kind != TokKind::Ident)
            throw SyntaxError(t.line, t.column, "expected statement, got '" + t.text + "'");

        Token head = lex_.next();
        if (head.text == "barrier" && peek_punct("(")) {
            lex_.next();
            expect_punct(")");
            expect_punct(";");
            Stmt s = Stmt::barrier();
            s.line = head.line;
            return s;
        }
        if (peek_punct("[")) {
            lex_.next();
            Expr index = parse_expr();
            expect_punct("]");
            expect_punct("=");
            Expr value = parse_expr();
            expect_punct(";");
            Stmt s = Stmt::store(head.text, std::move(index), std::move(value));
            s.line = head.line;
            return s;
        }
        expect_punct("=");
        Expr value = parse_expr();
        expect_punct(";");
        Stmt s = Stmt::assign(head.text, std::move(value));
        s.line = head.line;
        return s;
    }

    Stmt parse_if() {
        Token kw = lex_.next();
        expect_punct("(");
        Expr cond = parse_expr();
        expect_punct(")");
        std::vector<Stmt> then_body = parse_block();
        std::vector<Stmt> else_body;
        if (peek_keyword("else")) {
            lex_.next();
            else_body = parse_block();
        }
        Stmt s = Stmt::if_(std::move(cond), std::move(then_body), std::move(else_body));
        s.line = kw.line;
        return s;
    }

    Stmt parse_while() {
        Token kw = lex_.next();
        expect_punct("(");
        Expr cond = parse_expr();
        expect_punct(")");
        Stmt s = Stmt::while_(std::move(cond), parse_block());
        s.line = kw.line;
        return s;
    }

    std::vector<Stmt> parse_block() {
        expect_punct("{");
        std::vector<Stmt> body;
        while (!peek_punct("}")) body.push_back(parse_stmt());
        expect_punct("}");
        return body;
    }

    // Precedence ladder: || < && < comparison (non-associative) < +- < */% < unary.
    Expr parse_expr() { return parse_or(); }

    Expr parse_or() {
        Expr e = parse_and();
        while (peek_punct("||")) {
            Token op = lex_.next();
            e = at(op, Expr::binary(BinOp::Or, std::move(e), parse_and()));
        }
        return e;
    }

    Expr parse_and() {
        Expr e = parse_cmp();
        while (peek_punct("&&")) {
            Token op = lex_.next();
            e = at(op, Expr::binary(BinOp::And, std::move(e), parse_cmp()));
        }
        return e;
    }

    Expr parse_cmp() {
        Expr e = parse_add();
        BinOp op;
        if (peek_cmp_op(op)) {
            Token t = lex_.next();
            e = at(t, Expr::binary(op, std::move(e), parse_add()));
        }
        return e;
    }

    Expr parse_add() {
        Expr e = parse_mul();
        while (peek_punct("+") || peek_punct("-")) {
            Token op = lex_.next();
            e = at(op, Expr::binary(op.text == "+" ? BinOp::Add : BinOp::Sub, std::move(e), parse_mul()));
        }
        return e;
    }

    Expr parse_mul() {
        Expr e = parse_unary();
        while (peek_punct("*") || peek_punct("/") || peek_punct("%")) {
            Token op = lex_.next();
            BinOp b = op.text == "*" ? BinOp::Mul : (op.text == "/" ? BinOp::Div : BinOp::Rem);
            e = at(op, Expr::binary(b, std::move(e), parse_unary()));
        }
        return e;
    }

    Expr parse_unary() {
        if (peek_punct("-")) {
            Token op = lex_.next();
            Expr operand = parse_unary();
            // Fold sign into literals so negative constants round-trip as a
            // single node; the canonical form never contains -<literal>.
            if (operand.kind == Expr::Kind::IntLit) {
                operand.int_value = -operand.int_value;
                return operand;
            }
            if (operand.kind == Expr::Kind::FloatLit) {
                operand.float_value = -operand.float_value;
                return operand;
            }
            return at(op, Expr::unary(UnOp::Neg, std::move(operand)));
        }
        if (peek_punct("!")) {
            Token op = lex_.next();
            return at(op, Expr::unary(UnOp::Not, parse_unary()));
        }
        return parse_postfix();
    }

    Expr parse_postfix() {
        const Token& t = lex_.peek();
        if (t.kind == TokKind::IntLit) {
            Token lit = lex_.next();
            // Magnitudes above 2^63-1 are only reachable through the unary
            // minus fold, which cannot see them; reject here.
            if (lit.int_value > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
                throw SyntaxError(lit.line, lit.column, "integer literal out of range '" + lit.text + "'");
            return at(lit, Expr::int_lit(static_cast<std::int64_t>(lit.int_value)));
        }
        if (t.kind == TokKind::FloatLit) {
            Token lit = lex_.next();
            return at(lit, Expr::float_lit(lit.float_value));
        }
        if (t.kind == TokKind::Punct && t.text == "(") {
            lex_.next();
            Expr e = parse_expr();
            expect_punct(")");
            return e;
        }
        if (t.kind == TokKind::Keyword) {
            ScalarType cast_to;
            if (scalar_keyword(t.text, cast_to)) {
                Token kw = lex_.next();
                expect_punct("(");
                Expr operand = parse_expr();
                expect_punct(")");
                return at(kw, Expr::cast(cast_to, std::move(operand)));
            }
            throw SyntaxError(t.line, t.column, "unexpected keyword '" + t.text + "' in expression");
        }
        if (t.kind != TokKind::Ident)
            throw SyntaxError(t.line, t.column, "expected expression, got '" + printable(t) + "'");

        Token name = lex_.next();
        if (peek_punct("(")) {
            const IntrinsicInfo* info = find_intrinsic(name.text);
            if (info == nullptr) throw UnknownIntrinsic(name.line, name.text);
            if (info->kind == IntrinsicKind::Barrier)
                throw SyntaxError(name.line, name.column, "barrier() is a statement, not an expression");
            lex_.next();
            std::vector<Expr> args;
            if (!peek_punct(")")) {
                while (true) {
                    args.push_back(parse_expr());
                    if (peek_punct(",")) {
                        lex_.next();
                        continue;
                    }
                    break;
                }
            }
            expect_punct(")");
            if (static_cast<int>(args.size()) != info->arity)
                throw ArityError("intrinsic '" + name.text + "'", info->arity, static_cast<int>(args.size()));
            return at(name, Expr::intrinsic(name.text, std::move(args)));
        }
        if (peek_punct("[")) {
            lex_.next();
            Expr index = parse_expr();
            expect_punct("]");
            return at(name, Expr::load(name.text, std::move(index)));
        }
        return at(name, Expr::var(name.text));
    }

    // ---- validation --------------------------------------------------------

    struct Scope {
        const KernelAst* kernel;
        std::set<std::string> params;
        std::set<std::string> shared;
    };

    static void validate(const KernelAst& k) {
        Scope scope{&k, {}, {}};
        for (const auto& p : k.params) scope.params.insert(p);
        for (const auto& d : k.shared_decls) scope.shared.insert(d.name);
        std::set<std::string> assigned;
        validate_body(k.body, scope, assigned);
    }

    // Definite assignment: `assigned` is the set of locals known on every
    // path reaching this point. Returns true when the statement list always
    // terminates the kernel (ends in return on all paths).
    static bool validate_body(const std::vector<Stmt>& body, const Scope& scope, std::set<std::string>& assigned) {
        for (const auto& s : body) {
            switch (s.kind) {
                case Stmt::Kind::Assign: {
                    validate_expr(s.exprs[0], scope, assigned, s.line);
                    if (scope.params.count(s.target) || scope.shared.count(s.target))
                        throw SyntaxError(s.line, 1, "cannot assign to parameter or shared array '" + s.target + "'");
                    if (find_intrinsic(s.target) != nullptr)
                        throw SyntaxError(s.line, 1, "cannot assign to intrinsic '" + s.target + "'");
                    assigned.insert(s.target);
                    break;
                }
                case Stmt::Kind::Store: {
                    if (!scope.params.count(s.target) && !scope.shared.count(s.target))
                        throw SyntaxError(s.line, 1,
                                          "store target '" + s.target + "' is not a parameter or shared array");
                    validate_expr(s.exprs[0], scope, assigned, s.line);
                    validate_expr(s.exprs[1], scope, assigned, s.line);
                    break;
                }
                case Stmt::Kind::If: {
                    validate_expr(s.exprs[0], scope, assigned, s.line);
                    std::set<std::string> then_set = assigned;
                    std::set<std::string> else_set = assigned;
                    bool then_returns = validate_body(s.then_body, scope, then_set);
                    bool else_returns = validate_body(s.else_body, scope, else_set);
                    if (then_returns && else_returns) return true;
                    if (then_returns) assigned = std::move(else_set);
                    else if (else_returns) assigned = std::move(then_set);
                    else {
                        std::set<std::string> both;
                        for (const auto& n : then_set)
                            if (else_set.count(n)) both.insert(n);
                        assigned = std::move(both);
                    }
                    break;
                }
                case Stmt::Kind::While: {
                    validate_expr(s.exprs[0], scope, assigned, s.line);
                    // The body may run zero times: its assignments do not
                    // survive the loop.
                    std::set<std::string> body_set = assigned;
                    validate_body(s.then_body, scope, body_set);
                    break;
                }
                case Stmt::Kind::Barrier:
                    break;
                case Stmt::Kind::Return:
                    return true;
            }
        }
        return false;
    }

    static void validate_expr(const Expr& e, const Scope& scope, const std::set<std::string>& assigned, int line) {
        switch (e.kind) {
            case Expr::Kind::IntLit:
            case Expr::Kind::FloatLit:
                return;
            case Expr::Kind::Var:
                if (scope.params.count(e.name) || assigned.count(e.name)) return;
                if (scope.shared.count(e.name))
                    throw SyntaxError(line, e.column, "shared array '" + e.name + "' used without an index");
                if (find_intrinsic(e.name) != nullptr)
                    throw SyntaxError(line, e.column, "intrinsic '" + e.name + "' must be called");
                throw SyntaxError(line, e.column,
                                  "identifier '" + e.name + "' is not a parameter, shared array, or assigned local");
            case Expr::Kind::Load:
                if (!scope.params.count(e.name) && !scope.shared.count(e.name) && !assigned.count(e.name))
                    throw SyntaxError(line, e.column, "unknown array '" + e.name + "'");
                break;
            case Expr::Kind::Intrinsic:
                break;
            default:
                break;
        }
        for (const auto& child : e.operands) validate_expr(child, scope, assigned, line);
    }

    // ---- token helpers ------------------------------------------------------

    static bool scalar_keyword(std::string_view s, ScalarType& out) {
        if (s == "i32") out = ScalarType::I32;
        else if (s == "i64") out = ScalarType::I64;
        else if (s == "f32") out = ScalarType::F32;
        else if (s == "f64") out = ScalarType::F64;
        else return false;
        return true;
    }

    static std::string printable(const Token& t) { return t.kind == TokKind::End ? "end of file" : t.text; }

    static Expr at(const Token& t, Expr e) {
        e.line = t.line;
        e.column = t.column;
        return e;
    }

    bool peek_punct(std::string_view p) const {
        return lex_.peek().kind == TokKind::Punct && lex_.peek().text == p;
    }

    bool peek_keyword(std::string_view k) const {
        return lex_.peek().kind == TokKind::Keyword && lex_.peek().text == k;
    }

    bool peek_cmp_op(BinOp& op) const {
        if (lex_.peek().kind != TokKind::Punct) return false;
        const std::string& t = lex_.peek().text;
        if (t == "==") op = BinOp::Eq;
        else if (t == "!=") op = BinOp::Ne;
        else if (t == "<") op = BinOp::Lt;
        else if (t == "<=") op = BinOp::Le;
        else if (t == ">") op = BinOp::Gt;
        else if (t == ">=") op = BinOp::Ge;
        else return false;
        return true;
    }

    Token expect(TokKind kind, std::string_view what) {
        const Token& t = lex_.peek();
        if (t.kind != kind)
            throw SyntaxError(t.line, t.column, "expected " + std::string(what) + ", got '" + printable(t) + "'");
        return lex_.next();
    }

    void expect_punct(std::string_view p) {
        const Token& t = lex_.peek();
        if (t.kind != TokKind::Punct || t.text != p)
            throw SyntaxError(t.line, t.column, "expected '" + std::string(p) + "', got '" + printable(t) + "'");
        lex_.next();
    }

    void expect_keyword(std::string_view k) {
        const Token& t = lex_.peek();
        if (t.kind != TokKind::Keyword || t.text != k)
            throw SyntaxError(t.line, t.column, "expected '" + std::string(k) + "', got '" + printable(t) + "'");
        lex_.next();
    }

    Lexer lex_;
};

}  // namespace detail

// Parses UTF-8 kernel source into one KernelAst per `kernel` definition, in
// source order. Throws SyntaxError / DuplicateName / UnknownIntrinsic /
// ArityError; never crashes on malformed input.
inline std::vector<KernelAst> parse_kernel_file(std::string_view source) {
    detail::Parser p(source);
    return p.parse_file();
}

// Convenience for sources expected to hold exactly one kernel.
inline KernelAst parse_kernel(std::string_view source) {
    auto kernels = parse_kernel_file(source);
    if (kernels.size() != 1)
        throw SyntaxError(1, 1, "expected exactly one kernel definition, found " + std::to_string(kernels.size()));
    return std::move(kernels.front());
}

}  // namespace gridjit
