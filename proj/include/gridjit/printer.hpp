// SPDX-License-Identifier: Apache-2.0
//
// Canonical-form kernel printer: parse_kernel_file(print_kernel(ast)) yields
// an AST structurally equal to `ast`. Parentheses are minimal (precedence
// driven); float literals print in shortest round-trip form with a mandatory
// '.' or exponent so they re-lex as floats.
#pragma once

#include <charconv>
#include <string>

#include "gridjit/ast.hpp"

namespace gridjit {

namespace detail {

// Higher binds tighter. Comparisons are non-associative; everything else is
// left-associative.
inline int precedence(BinOp op) {
    if (op == BinOp::Or) return 1;
    if (op == BinOp::And) return 2;
    if (is_comparison(op)) return 3;
    if (op == BinOp::Add || op == BinOp::Sub) return 4;
    return 5;  // * / %
}

inline std::string format_int(std::int64_t v) { return std::to_string(v); }

inline std::string format_float(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, end);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

class AstPrinter {
  public:
    std::string print(const KernelAst& k) {
        out_.clear();
        out_ += "kernel " + k.name + "(";
        for (std::size_t i = 0; i < k.params.size(); ++i) {
            if (i) out_ += ", ";
            out_ += k.params[i];
        }
        out_ += ") {\n";
        indent_ = 1;
        for (const auto& d : k.shared_decls) {
            pad();
            out_ += "shared " + d.name + "[" + std::string(scalar_name(d.elem)) + "; " +
                    std::to_string(d.count) + "];\n";
        }
        print_body(k.body);
        out_ += "}\n";
        return out_;
    }

  private:
    void print_body(const std::vector<Stmt>& body) {
        for (const auto& s : body) print_stmt(s);
    }

    void print_stmt(const Stmt& s) {
        pad();
        switch (s.kind) {
            case Stmt::Kind::Assign:
                out_ += s.target + " = ";
                print_expr(s.exprs[0], 0);
                out_ += ";\n";
                break;
            case Stmt::Kind::Store:
                out_ += s.target + "[";
                print_expr(s.exprs[0], 0);
                out_ += "] = ";
                print_expr(s.exprs[1], 0);
                out_ += ";\n";
                break;
            case Stmt::Kind::If:
                out_ += "if (";
                print_expr(s.exprs[0], 0);
                out_ += ") {\n";
                ++indent_;
                print_body(s.then_body);
                --indent_;
                pad();
                if (s.else_body.empty()) {
                    out_ += "}\n";
                } else {
                    out_ += "} else {\n";
                    ++indent_;
                    print_body(s.else_body);
                    --indent_;
                    pad();
                    out_ += "}\n";
                }
                break;
            case Stmt::Kind::While:
                out_ += "while (";
                print_expr(s.exprs[0], 0);
                out_ += ") {\n";
                ++indent_;
                print_body(s.then_body);
                --indent_;
                pad();
                out_ += "}\n";
                break;
            case Stmt::Kind::Barrier:
                out_ += "barrier();\n";
                break;
            case Stmt::Kind::Return:
                out_ += "return;\n";
                break;
        }
    }

    // `min_prec` is the tightest precedence this position accepts without
    // parentheses: left children of a left-associative op pass the op's own
    // precedence, right children (and both comparison operands, which never
    // chain) pass one higher.
    void print_expr(const Expr& e, int min_prec) {
        switch (e.kind) {
            case Expr::Kind::IntLit:
                out_ += format_int(e.int_value);
                return;
            case Expr::Kind::FloatLit:
                out_ += format_float(e.float_value);
                return;
            case Expr::Kind::Var:
                out_ += e.name;
                return;
            case Expr::Kind::Load:
                out_ += e.name + "[";
                print_expr(e.operands[0], 0);
                out_ += "]";
                return;
            case Expr::Kind::Cast:
                out_ += std::string(scalar_name(e.cast_type)) + "(";
                print_expr(e.operands[0], 0);
                out_ += ")";
                return;
            case Expr::Kind::Intrinsic: {
                out_ += e.name + "(";
                for (std::size_t i = 0; i < e.operands.size(); ++i) {
                    if (i) out_ += ", ";
                    print_expr(e.operands[i], 0);
                }
                out_ += ")";
                return;
            }
            case Expr::Kind::Unary: {
                out_ += e.un_op == UnOp::Neg ? "-" : "!";
                const Expr& inner = e.operands[0];
                bool parens = inner.kind == Expr::Kind::Binary;
                if (parens) out_ += "(";
                print_expr(inner, 0);
                if (parens) out_ += ")";
                return;
            }
            case Expr::Kind::Binary: {
                int prec = precedence(e.bin_op);
                bool parens = prec < min_prec;
                if (parens) out_ += "(";
                print_expr(e.operands[0], is_comparison(e.bin_op) ? prec + 1 : prec);
                out_ += " " + std::string(bin_op_text(e.bin_op)) + " ";
                print_expr(e.operands[1], prec + 1);
                if (parens) out_ += ")";
                return;
            }
        }
    }

    void pad() { out_.append(static_cast<std::size_t>(indent_) * 2, ' '); }

    std::string out_;
    int indent_ = 0;
};

}  // namespace detail

inline std::string print_kernel(const KernelAst& ast) {
    detail::AstPrinter p;
    return p.print(ast);
}

inline std::string print_kernels(const std::vector<KernelAst>& asts) {
    std::string out;
    for (std::size_t i = 0; i < asts.size(); ++i) {
        if (i) out += "\n";
        out += print_kernel(asts[i]);
    }
    return out;
}

}  // namespace gridjit
