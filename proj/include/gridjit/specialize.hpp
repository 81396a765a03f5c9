// SPDX-License-Identifier: Apache-2.0
//
// Launch-time type specialization. Given an untyped kernel and the concrete
// argument types of one launch, infer a single scalar type for every local
// and expression node or abort:
//
//   - widening only: i32->i64 and f32->f64; int and float never mix
//     implicitly (explicit casts only)
//   - integer literals default to i32 (i64 when they don't fit) and adopt a
//     wider same-family type from a binary partner or a store's element type;
//     float literals are f64 and never narrow implicitly
//   - a local whose assignments demand incompatible types on different paths
//     cannot be represented natively: UnresolvedType aborts the compilation
//
// Inference is a forward fixed point over assignments; the lattice has
// height 2 per family, so it converges in a handful of passes.
#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridjit/ast.hpp"
#include "gridjit/errors.hpp"
#include "gridjit/intrinsics.hpp"
#include "gridjit/types.hpp"

namespace gridjit {

struct TypedKernel {
    KernelAst ast;  // deep copy with dense expr ids
    Signature signature;
    std::map<std::string, ScalarType> local_types;
    std::vector<ScalarType> expr_types;  // keyed by Expr::id

    ScalarType type_of(const Expr& e) const { return expr_types.at(static_cast<std::size_t>(e.id)); }
};

namespace detail {

class Specializer {
  public:
    Specializer(const KernelAst& ast, const std::vector<ArgType>& arg_types) : ast_(ast), args_(arg_types) {}

    TypedKernel run() {
        if (args_.size() != ast_.params.size())
            throw ArityError("kernel '" + ast_.name + "'", static_cast<int>(ast_.params.size()),
                             static_cast<int>(args_.size()));
        for (std::size_t i = 0; i < args_.size(); ++i) {
            if (args_[i].elem == ScalarType::Pred)
                throw TypeMismatch("parameter '" + ast_.params[i] + "': pred cannot cross the kernel boundary");
            params_[ast_.params[i]] = args_[i];
        }
        for (const auto& d : ast_.shared_decls) shared_[d.name] = d.elem;

        // Fixed point: propagate assignment types until no local widens.
        changed_ = true;
        int guard = 0;
        while (changed_) {
            changed_ = false;
            if (++guard > 8) throw LoweringError("type inference failed to converge");
            infer_body(ast_.body);
        }

        TypedKernel tk;
        tk.ast = ast_;
        int count = tk.ast.renumber_exprs();
        tk.signature = signature_of(ast_.name, args_);
        tk.local_types = locals_as_map();
        tk.expr_types.assign(static_cast<std::size_t>(count), ScalarType::I32);
        recording_ = &tk.expr_types;
        final_pass_ = true;
        record_body(tk.ast.body);
        final_pass_ = false;
        recording_ = nullptr;
        return tk;
    }

  private:
    // ---- inference passes ---------------------------------------------------

    void infer_body(const std::vector<Stmt>& body) {
        for (const auto& s : body) {
            switch (s.kind) {
                case Stmt::Kind::Assign: {
                    ScalarType t = type_expr(s.exprs[0], std::nullopt);
                    join_local(s.target, t, s.line);
                    break;
                }
                case Stmt::Kind::Store:
                    type_store(s);
                    break;
                case Stmt::Kind::If:
                case Stmt::Kind::While: {
                    ScalarType c = type_expr(s.exprs[0], std::nullopt);
                    if (c != ScalarType::Pred)
                        throw TypeMismatch(loc(s.exprs[0]) + ": condition must be a predicate, got " +
                                           std::string(scalar_name(c)));
                    infer_body(s.then_body);
                    infer_body(s.else_body);
                    break;
                }
                case Stmt::Kind::Barrier:
                case Stmt::Kind::Return:
                    break;
            }
        }
    }

    void type_store(const Stmt& s) {
        ScalarType elem = array_elem(s.target, s.line);
        ScalarType idx = type_expr(s.exprs[0], std::nullopt);
        if (!is_int(idx))
            throw IndexTypeError(loc(s.exprs[0]) + ": index into '" + s.target + "' has type " +
                                 std::string(scalar_name(idx)));
        ScalarType val = type_expr(s.exprs[1], elem);
        // Store equality is the one width-sensitive check: a local may still
        // widen on a later pass, so enforce it only once types are stable.
        if (final_pass_ && val != elem)
            throw TypeMismatch(loc(s.exprs[1]) + ": cannot store " + std::string(scalar_name(val)) + " into '" +
                               s.target + "' of element type " + std::string(scalar_name(elem)) +
                               " (use an explicit cast)");
    }

    // `adopt` is the contextual element type for bare literals in
    // store-value position; literals also adopt wider binary partners below.
    ScalarType type_expr(const Expr& e, std::optional<ScalarType> adopt) {
        ScalarType t = type_expr_inner(e, adopt);
        if (recording_) (*recording_)[static_cast<std::size_t>(e.id)] = t;
        return t;
    }

    ScalarType type_expr_inner(const Expr& e, std::optional<ScalarType> adopt) {
        switch (e.kind) {
            case Expr::Kind::IntLit: {
                ScalarType natural = fits_i32(e.int_value) ? ScalarType::I32 : ScalarType::I64;
                if (adopt && is_int(*adopt) && scalar_size(*adopt) >= scalar_size(natural)) return *adopt;
                return natural;
            }
            case Expr::Kind::FloatLit:
                return ScalarType::F64;
            case Expr::Kind::Var: {
                auto p = params_.find(e.name);
                if (p != params_.end()) {
                    if (p->second.is_array())
                        throw TypeMismatch(loc(e) + ": array parameter '" + e.name + "' used as a scalar");
                    return p->second.elem;
                }
                if (shared_.count(e.name))
                    throw TypeMismatch(loc(e) + ": shared array '" + e.name + "' used as a scalar");
                auto l = locals_.find(e.name);
                if (l == locals_.end() || !l->second.has_value())
                    throw TypeMismatch(loc(e) + ": use of unassigned local '" + e.name + "'");
                return *l->second;
            }
            case Expr::Kind::Load: {
                ScalarType elem = array_elem(e.name, e.line);
                ScalarType idx = type_expr(e.operands[0], std::nullopt);
                if (!is_int(idx))
                    throw IndexTypeError(loc(e.operands[0]) + ": index into '" + e.name + "' has type " +
                                         std::string(scalar_name(idx)));
                return elem;
            }
            case Expr::Kind::Binary:
                return type_binary(e);
            case Expr::Kind::Unary: {
                ScalarType t = type_expr(e.operands[0], std::nullopt);
                if (e.un_op == UnOp::Neg) {
                    if (!is_numeric(t)) throw TypeMismatch(loc(e) + ": '-' needs a numeric operand");
                    return t;
                }
                if (t != ScalarType::Pred) throw TypeMismatch(loc(e) + ": '!' needs a predicate operand");
                return ScalarType::Pred;
            }
            case Expr::Kind::Cast: {
                ScalarType t = type_expr(e.operands[0], std::nullopt);
                if (!is_numeric(t)) throw TypeMismatch(loc(e) + ": cannot cast a predicate");
                return e.cast_type;
            }
            case Expr::Kind::Intrinsic:
                return type_intrinsic(e);
        }
        throw LoweringError("unreachable expression kind");
    }

    ScalarType type_binary(const Expr& e) {
        if (is_logical(e.bin_op)) {
            ScalarType l = type_expr(e.operands[0], std::nullopt);
            ScalarType r = type_expr(e.operands[1], std::nullopt);
            if (l != ScalarType::Pred || r != ScalarType::Pred)
                throw TypeMismatch(loc(e) + ": '" + std::string(bin_op_text(e.bin_op)) +
                                   "' needs predicate operands");
            return ScalarType::Pred;
        }

        ScalarType joined = join_operands(e, e.operands[0], e.operands[1]);
        if (is_comparison(e.bin_op)) return ScalarType::Pred;
        if (e.bin_op == BinOp::Rem && !is_int(joined))
            throw TypeMismatch(loc(e) + ": '%' needs integer operands");
        return joined;
    }

    // Types both operands, letting a literal adopt the other side's wider
    // same-family type, and returns the widening join.
    ScalarType join_operands(const Expr& parent, const Expr& lhs, const Expr& rhs) {
        bool l_lit = lhs.kind == Expr::Kind::IntLit;
        bool r_lit = rhs.kind == Expr::Kind::IntLit;
        ScalarType l, r;
        if (l_lit && !r_lit) {
            r = type_expr(rhs, std::nullopt);
            l = type_expr(lhs, r);
        } else if (r_lit && !l_lit) {
            l = type_expr(lhs, std::nullopt);
            r = type_expr(rhs, l);
        } else {
            l = type_expr(lhs, std::nullopt);
            r = type_expr(rhs, std::nullopt);
        }
        if (!is_numeric(l) || !is_numeric(r))
            throw TypeMismatch(loc(parent) + ": '" + op_text(parent) + "' needs numeric operands");
        ScalarType joined;
        if (!widen_join(l, r, joined))
            throw TypeMismatch(loc(parent) + ": operands of '" + op_text(parent) + "' mix " +
                               std::string(scalar_name(l)) + " and " + std::string(scalar_name(r)) +
                               " (use an explicit cast)");
        return joined;
    }

    ScalarType type_intrinsic(const Expr& e) {
        const IntrinsicInfo* info = find_intrinsic(e.name);
        if (info == nullptr) throw UnknownIntrinsic(e.line, e.name);
        switch (info->kind) {
            case IntrinsicKind::CoordId:
            case IntrinsicKind::CoordSize:
                return ScalarType::I32;
            case IntrinsicKind::Barrier:
                throw TypeMismatch(loc(e) + ": barrier() has no value");
            case IntrinsicKind::MathUnary: {
                ScalarType t = type_expr(e.operands[0], std::nullopt);
                if (!is_numeric(t)) throw TypeMismatch(loc(e) + ": '" + e.name + "' needs a numeric operand");
                if (info->float_only && !is_float(t))
                    throw TypeMismatch(loc(e) + ": '" + e.name + "' needs a float operand (use an explicit cast)");
                return t;
            }
            case IntrinsicKind::MathBinary: {
                ScalarType t = join_operands(e, e.operands[0], e.operands[1]);
                return t;
            }
            case IntrinsicKind::MathTernary: {
                ScalarType ab = join_operands(e, e.operands[0], e.operands[1]);
                ScalarType c = type_expr(e.operands[2], ab);
                ScalarType joined;
                if (!widen_join(ab, c, joined) || !is_float(joined))
                    throw TypeMismatch(loc(e) + ": 'fma' needs float operands of one family");
                return joined;
            }
        }
        throw LoweringError("unreachable intrinsic kind");
    }

    void join_local(const std::string& name, ScalarType t, int line) {
        auto& slot = locals_[name];
        if (!slot.has_value()) {
            slot = t;
            changed_ = true;
            return;
        }
        ScalarType joined;
        if (!widen_join(*slot, t, joined))
            throw UnresolvedType(name, {std::string(scalar_name(*slot)), std::string(scalar_name(t))});
        if (joined != *slot) {
            slot = joined;
            changed_ = true;
        }
        (void)line;
    }

    // ---- recording pass (final types into expr_types) -----------------------

    void record_body(const std::vector<Stmt>& body) { infer_body(body); }

    // ---- helpers -------------------------------------------------------------

    ScalarType array_elem(const std::string& name, int line) {
        auto p = params_.find(name);
        if (p != params_.end()) {
            if (!p->second.is_array())
                throw TypeMismatch("line " + std::to_string(line) + ": indexing scalar parameter '" + name + "'");
            return p->second.elem;
        }
        auto s = shared_.find(name);
        if (s != shared_.end()) return s->second;
        throw TypeMismatch("line " + std::to_string(line) + ": indexing scalar '" + name + "'");
    }

    std::map<std::string, ScalarType> locals_as_map() const {
        std::map<std::string, ScalarType> out;
        for (const auto& [name, t] : locals_)
            if (t.has_value()) out.emplace(name, *t);
        return out;
    }

    static std::string op_text(const Expr& e) {
        return e.kind == Expr::Kind::Binary ? std::string(bin_op_text(e.bin_op)) : e.name;
    }

    static std::string loc(const Expr& e) {
        return "line " + std::to_string(e.line) + ":" + std::to_string(e.column);
    }

    static bool fits_i32(std::int64_t v) {
        return v >= std::numeric_limits<std::int32_t>::min() && v <= std::numeric_limits<std::int32_t>::max();
    }

    const KernelAst& ast_;
    const std::vector<ArgType>& args_;
    std::map<std::string, ArgType> params_;
    std::map<std::string, ScalarType> shared_;
    std::map<std::string, std::optional<ScalarType>> locals_;
    bool changed_ = false;
    bool final_pass_ = false;
    std::vector<ScalarType>* recording_ = nullptr;
};

}  // namespace detail

// Specializes `ast` for one argument-type tuple. Throws UnresolvedType when a
// local cannot be given a single native type (the boxing abort), TypeMismatch
// or IndexTypeError on ill-typed operations, ArityError on arity mismatch.
inline TypedKernel specialize(const KernelAst& ast, const std::vector<ArgType>& arg_types) {
    detail::Specializer s(ast, arg_types);
    return s.run();
}

}  // namespace gridjit
