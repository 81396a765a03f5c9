// SPDX-License-Identifier: Apache-2.0
//
// Untyped kernel AST. Value semantics throughout: nodes own their children,
// copies are deep, and operator== is structural (node ids and source lines
// are metadata and do not participate).
#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gridjit/types.hpp"

namespace gridjit {

enum class BinOp : std::uint8_t { Add, Sub, Mul, Div, Rem, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class UnOp : std::uint8_t { Neg, Not };

constexpr std::string_view bin_op_text(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
        case BinOp::Rem: return "%";
        case BinOp::Eq: return "==";
        case BinOp::Ne: return "!=";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "<=";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
        case BinOp::And: return "&&";
        case BinOp::Or: return "||";
    }
    return "?";
}

constexpr bool is_comparison(BinOp op) {
    return op == BinOp::Eq || op == BinOp::Ne || op == BinOp::Lt || op == BinOp::Le || op == BinOp::Gt ||
           op == BinOp::Ge;
}

constexpr bool is_logical(BinOp op) { return op == BinOp::And || op == BinOp::Or; }

struct Expr {
    enum class Kind : std::uint8_t { IntLit, FloatLit, Var, Load, Binary, Unary, Cast, Intrinsic };

    Kind kind = Kind::IntLit;
    // Dense per-kernel index assigned by KernelAst::renumber_exprs; the
    // specializer's expr_types vector is keyed by it.
    int id = -1;
    int line = 0;
    int column = 0;

    std::int64_t int_value = 0;    // IntLit
    double float_value = 0.0;      // FloatLit
    std::string name;              // Var / Load array / Intrinsic
    BinOp bin_op = BinOp::Add;     // Binary
    UnOp un_op = UnOp::Neg;        // Unary
    ScalarType cast_type = ScalarType::I32;  // Cast
    std::vector<Expr> operands;    // Load: [index]; Binary: [lhs, rhs]; Unary/Cast: [operand]; Intrinsic: args

    static Expr int_lit(std::int64_t v) {
        Expr e;
        e.kind = Kind::IntLit;
        e.int_value = v;
        return e;
    }
    static Expr float_lit(double v) {
        Expr e;
        e.kind = Kind::FloatLit;
        e.float_value = v;
        return e;
    }
    static Expr var(std::string name) {
        Expr e;
        e.kind = Kind::Var;
        e.name = std::move(name);
        return e;
    }
    static Expr load(std::string array, Expr index) {
        Expr e;
        e.kind = Kind::Load;
        e.name = std::move(array);
        e.operands.push_back(std::move(index));
        return e;
    }
    static Expr binary(BinOp op, Expr lhs, Expr rhs) {
        Expr e;
        e.kind = Kind::Binary;
        e.bin_op = op;
        e.operands.push_back(std::move(lhs));
        e.operands.push_back(std::move(rhs));
        return e;
    }
    static Expr unary(UnOp op, Expr operand) {
        Expr e;
        e.kind = Kind::Unary;
        e.un_op = op;
        e.operands.push_back(std::move(operand));
        return e;
    }
    static Expr cast(ScalarType target, Expr operand) {
        Expr e;
        e.kind = Kind::Cast;
        e.cast_type = target;
        e.operands.push_back(std::move(operand));
        return e;
    }
    static Expr intrinsic(std::string name, std::vector<Expr> args = {}) {
        Expr e;
        e.kind = Kind::Intrinsic;
        e.name = std::move(name);
        e.operands = std::move(args);
        return e;
    }

    friend bool operator==(const Expr& a, const Expr& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case Kind::IntLit:
                if (a.int_value != b.int_value) return false;
                break;
            case Kind::FloatLit:
                // Bitwise: canonical printing is shortest-round-trip, so the
                // bits survive a print/parse cycle exactly.
                if (std::bit_cast<std::uint64_t>(a.float_value) != std::bit_cast<std::uint64_t>(b.float_value))
                    return false;
                break;
            case Kind::Var:
            case Kind::Load:
            case Kind::Intrinsic:
                if (a.name != b.name) return false;
                break;
            case Kind::Binary:
                if (a.bin_op != b.bin_op) return false;
                break;
            case Kind::Unary:
                if (a.un_op != b.un_op) return false;
                break;
            case Kind::Cast:
                if (a.cast_type != b.cast_type) return false;
                break;
        }
        return a.operands == b.operands;
    }
};

struct Stmt {
    enum class Kind : std::uint8_t { Assign, Store, If, While, Barrier, Return };

    Kind kind = Kind::Barrier;
    int line = 0;

    std::string target;           // Assign: local; Store: array
    std::vector<Expr> exprs;      // Assign: [value]; Store: [index, value]; If/While: [cond]
    std::vector<Stmt> then_body;  // If then-branch / While body
    std::vector<Stmt> else_body;  // If else-branch

    static Stmt assign(std::string local, Expr value) {
        Stmt s;
        s.kind = Kind::Assign;
        s.target = std::move(local);
        s.exprs.push_back(std::move(value));
        return s;
    }
    static Stmt store(std::string array, Expr index, Expr value) {
        Stmt s;
        s.kind = Kind::Store;
        s.target = std::move(array);
        s.exprs.push_back(std::move(index));
        s.exprs.push_back(std::move(value));
        return s;
    }
    static Stmt if_(Expr cond, std::vector<Stmt> then_body, std::vector<Stmt> else_body = {}) {
        Stmt s;
        s.kind = Kind::If;
        s.exprs.push_back(std::move(cond));
        s.then_body = std::move(then_body);
        s.else_body = std::move(else_body);
        return s;
    }
    static Stmt while_(Expr cond, std::vector<Stmt> body) {
        Stmt s;
        s.kind = Kind::While;
        s.exprs.push_back(std::move(cond));
        s.then_body = std::move(body);
        return s;
    }
    static Stmt barrier() {
        Stmt s;
        s.kind = Kind::Barrier;
        return s;
    }
    static Stmt return_() {
        Stmt s;
        s.kind = Kind::Return;
        return s;
    }

    friend bool operator==(const Stmt& a, const Stmt& b) {
        return a.kind == b.kind && a.target == b.target && a.exprs == b.exprs && a.then_body == b.then_body &&
               a.else_body == b.else_body;
    }
};

struct SharedDecl {
    std::string name;
    ScalarType elem = ScalarType::F32;
    std::uint32_t count = 0;  // compile-time element count

    friend bool operator==(const SharedDecl&, const SharedDecl&) = default;
};

struct KernelAst {
    std::string name;
    std::vector<std::string> params;
    std::vector<SharedDecl> shared_decls;
    std::vector<Stmt> body;

    friend bool operator==(const KernelAst& a, const KernelAst& b) {
        return a.name == b.name && a.params == b.params && a.shared_decls == b.shared_decls && a.body == b.body;
    }

    // Assigns dense ids 0..n-1 to every Expr node in evaluation order and
    // returns the node count. Parsing does this automatically; hand-built
    // ASTs must call it before specialization.
    int renumber_exprs() {
        int next = 0;
        for (auto& s : body) renumber_stmt(s, next);
        return next;
    }

  private:
    static void renumber_expr(Expr& e, int& next) {
        e.id = next++;
        for (auto& child : e.operands) renumber_expr(child, next);
    }
    static void renumber_stmt(Stmt& s, int& next) {
        for (auto& e : s.exprs) renumber_expr(e, next);
        for (auto& c : s.then_body) renumber_stmt(c, next);
        for (auto& c : s.else_body) renumber_stmt(c, next);
    }
};

}  // namespace gridjit
