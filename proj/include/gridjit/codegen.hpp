// SPDX-License-Identifier: Apache-2.0
//
// Lowering from a typed kernel to a VPTX module.
//
// Conventions:
//   - infinite virtual registers, one fresh %r/%p per temporary in emission
//     order, no reuse; locals get one pinned register each
//   - address spaces are explicit on every memory op: param arrays are
//     .global, shared declarations are .shared
//   - array indices are 1-based in the source language and lower to 0-based
//     byte offsets: offset = (index - 1) * element_size, in i64 arithmetic
//   - thread/block id intrinsics read the 0-indexed special register and
//     add 1; dimension-size intrinsics read the register unadjusted
//   - If/While lower to label + conditional-branch patterns; no bounds
//     checks are emitted (the emulator's allocation table traps instead)
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gridjit/ast.hpp"
#include "gridjit/errors.hpp"
#include "gridjit/intrinsics.hpp"
#include "gridjit/specialize.hpp"
#include "gridjit/types.hpp"
#include "gridjit/vptx.hpp"

namespace gridjit {

namespace detail {

class Lowerer {
  public:
    explicit Lowerer(const TypedKernel& tk) : tk_(tk) {}

    vptx::Module run() {
        vptx::Module m;
        m.name = tk_.ast.name + "$" + tk_.signature.hash_hex();
        vptx::Kernel k;
        k.name = tk_.ast.name;
        for (std::size_t i = 0; i < tk_.ast.params.size(); ++i) {
            const ArgType& at = tk_.signature.arg_types[i];
            vptx::Param p;
            p.name = tk_.ast.params[i];
            p.kind = at.is_array() ? vptx::ParamKind::Pointer : vptx::ParamKind::Scalar;
            p.type = at.elem;
            k.params.push_back(std::move(p));
        }
        for (const auto& d : tk_.ast.shared_decls)
            k.shared.push_back(vptx::SharedArray{d.name, d.elem, d.count});

        kernel_ = &k;
        emit_body(tk_.ast.body);
        if (k.body.empty() || k.body.back().op != vptx::Opcode::Ret) emit0(vptx::Opcode::Ret);
        kernel_ = nullptr;
        m.kernels.push_back(std::move(k));
        return m;
    }

  private:
    struct Value {
        std::string reg;
        ScalarType type;
    };

    // ---- statements ----------------------------------------------------------

    void emit_body(const std::vector<Stmt>& body) {
        for (const auto& s : body) emit_stmt(s);
    }

    void emit_stmt(const Stmt& s) {
        switch (s.kind) {
            case Stmt::Kind::Assign: {
                ScalarType lt = tk_.local_types.at(s.target);
                Value v = eval(s.exprs[0]);
                v = widen_to(v, lt);
                std::string reg = local_reg(s.target, lt);
                emit_mov(reg, lt, vptx::Operand::reg(v.reg));
                break;
            }
            case Stmt::Kind::Store: {
                ScalarType elem = array_elem(s.target);
                Value addr = eval_address(s.target, s.exprs[0], elem);
                Value v = eval(s.exprs[1]);
                if (v.type != elem) throw LoweringError("store value type mismatch");
                vptx::Instr in;
                in.op = vptx::Opcode::St;
                in.space = space_of(s.target);
                in.type = elem;
                in.ops = {vptx::Operand::reg(addr.reg), vptx::Operand::reg(v.reg)};
                push(in);
                break;
            }
            case Stmt::Kind::If: {
                Value cond = eval(s.exprs[0]);
                int id = next_label_++;
                std::string else_label = "L_else_" + std::to_string(id);
                std::string end_label = "L_end_" + std::to_string(id);
                std::string not_reg = fresh_pred();
                emit2(vptx::Opcode::Not, ScalarType::Pred, not_reg, cond.reg);
                emit_branch_if(not_reg, s.else_body.empty() ? end_label : else_label);
                emit_body(s.then_body);
                if (!s.else_body.empty()) {
                    emit_bra(end_label);
                    emit_label(else_label);
                    emit_body(s.else_body);
                }
                emit_label(end_label);
                break;
            }
            case Stmt::Kind::While: {
                int id = next_label_++;
                std::string loop_label = "L_loop_" + std::to_string(id);
                std::string end_label = "L_end_" + std::to_string(id);
                emit_label(loop_label);
                Value cond = eval(s.exprs[0]);
                std::string not_reg = fresh_pred();
                emit2(vptx::Opcode::Not, ScalarType::Pred, not_reg, cond.reg);
                emit_branch_if(not_reg, end_label);
                emit_body(s.then_body);
                emit_bra(loop_label);
                emit_label(end_label);
                break;
            }
            case Stmt::Kind::Barrier:
                emit0(vptx::Opcode::BarSync);
                break;
            case Stmt::Kind::Return:
                emit0(vptx::Opcode::Ret);
                break;
        }
    }

    // ---- expressions ---------------------------------------------------------

    Value eval(const Expr& e) {
        ScalarType t = tk_.type_of(e);
        switch (e.kind) {
            case Expr::Kind::IntLit: {
                std::string r = fresh_reg(t);
                emit_mov(r, t, vptx::Operand::imm_int(e.int_value));
                return {r, t};
            }
            case Expr::Kind::FloatLit: {
                std::string r = fresh_reg(t);
                vptx::Operand imm = t == ScalarType::F32
                                        ? vptx::Operand::imm_f32(static_cast<float>(e.float_value))
                                        : vptx::Operand::imm_f64(e.float_value);
                emit_mov(r, t, imm);
                return {r, t};
            }
            case Expr::Kind::Var: {
                if (tk_.local_types.count(e.name)) return {local_reg(e.name, t), t};
                // Scalar parameter: materialize into a register.
                std::string r = fresh_reg(t);
                emit_mov(r, t, vptx::Operand::symbol(e.name));
                return {r, t};
            }
            case Expr::Kind::Load: {
                ScalarType elem = array_elem(e.name);
                Value addr = eval_address(e.name, e.operands[0], elem);
                std::string r = fresh_reg(elem);
                vptx::Instr in;
                in.op = vptx::Opcode::Ld;
                in.space = space_of(e.name);
                in.type = elem;
                in.ops = {vptx::Operand::reg(r), vptx::Operand::reg(addr.reg)};
                push(in);
                return {r, elem};
            }
            case Expr::Kind::Binary:
                return eval_binary(e, t);
            case Expr::Kind::Unary: {
                Value v = eval(e.operands[0]);
                std::string r = e.un_op == UnOp::Not ? fresh_pred() : fresh_reg(t);
                emit2(e.un_op == UnOp::Not ? vptx::Opcode::Not : vptx::Opcode::Neg, t, r, v.reg);
                return {r, t};
            }
            case Expr::Kind::Cast: {
                Value v = eval(e.operands[0]);
                if (v.type == t) {
                    std::string r = fresh_reg(t);
                    emit_mov(r, t, vptx::Operand::reg(v.reg));
                    return {r, t};
                }
                return convert(v, t);
            }
            case Expr::Kind::Intrinsic:
                return eval_intrinsic(e, t);
        }
        throw LoweringError("unreachable expression kind");
    }

    Value eval_binary(const Expr& e, ScalarType node_type) {
        if (is_logical(e.bin_op)) {
            Value l = eval(e.operands[0]);
            Value r = eval(e.operands[1]);
            std::string d = fresh_pred();
            emit3(e.bin_op == BinOp::And ? vptx::Opcode::And : vptx::Opcode::Or, ScalarType::Pred, d, l.reg,
                  r.reg);
            return {d, ScalarType::Pred};
        }
        Value l = eval(e.operands[0]);
        Value r = eval(e.operands[1]);
        if (is_comparison(e.bin_op)) {
            ScalarType cmp_type;
            if (!widen_join(l.type, r.type, cmp_type)) throw LoweringError("comparison operand families differ");
            l = widen_to(l, cmp_type);
            r = widen_to(r, cmp_type);
            std::string d = fresh_pred();
            vptx::Instr in;
            in.op = vptx::Opcode::Setp;
            in.cmp = cmp_of(e.bin_op);
            in.type = cmp_type;
            in.ops = {vptx::Operand::reg(d), vptx::Operand::reg(l.reg), vptx::Operand::reg(r.reg)};
            push(in);
            return {d, ScalarType::Pred};
        }
        l = widen_to(l, node_type);
        r = widen_to(r, node_type);
        std::string d = fresh_reg(node_type);
        emit3(arith_of(e.bin_op), node_type, d, l.reg, r.reg);
        return {d, node_type};
    }

    Value eval_intrinsic(const Expr& e, ScalarType node_type) {
        const IntrinsicInfo* info = find_intrinsic(e.name);
        if (info == nullptr) throw LoweringError("unknown intrinsic '" + e.name + "'");
        switch (info->kind) {
            case IntrinsicKind::CoordId: {
                vptx::Special sp;
                sp.family = info->block_level ? vptx::Special::Family::Ctaid : vptx::Special::Family::Tid;
                sp.axis = info->axis;
                std::string raw = fresh_reg(ScalarType::I32);
                emit_mov(raw, ScalarType::I32, vptx::Operand::special(sp));
                std::string one = fresh_reg(ScalarType::I32);
                emit_mov(one, ScalarType::I32, vptx::Operand::imm_int(1));
                std::string r = fresh_reg(ScalarType::I32);
                emit3(vptx::Opcode::Add, ScalarType::I32, r, raw, one);
                return {r, ScalarType::I32};
            }
            case IntrinsicKind::CoordSize: {
                vptx::Special sp;
                sp.family = info->block_level ? vptx::Special::Family::Nctaid : vptx::Special::Family::Ntid;
                sp.axis = info->axis;
                std::string r = fresh_reg(ScalarType::I32);
                emit_mov(r, ScalarType::I32, vptx::Operand::special(sp));
                return {r, ScalarType::I32};
            }
            case IntrinsicKind::MathUnary: {
                Value v = eval(e.operands[0]);
                std::string r = fresh_reg(node_type);
                emit2(math_unary_of(e.name), node_type, r, v.reg);
                return {r, node_type};
            }
            case IntrinsicKind::MathBinary: {
                Value a = widen_to(eval(e.operands[0]), node_type);
                Value b = widen_to(eval(e.operands[1]), node_type);
                std::string r = fresh_reg(node_type);
                emit3(e.name == "min" ? vptx::Opcode::Min : vptx::Opcode::Max, node_type, r, a.reg, b.reg);
                return {r, node_type};
            }
            case IntrinsicKind::MathTernary: {
                Value a = widen_to(eval(e.operands[0]), node_type);
                Value b = widen_to(eval(e.operands[1]), node_type);
                Value c = widen_to(eval(e.operands[2]), node_type);
                std::string r = fresh_reg(node_type);
                vptx::Instr in;
                in.op = vptx::Opcode::Fma;
                in.type = node_type;
                in.ops = {vptx::Operand::reg(r), vptx::Operand::reg(a.reg), vptx::Operand::reg(b.reg),
                          vptx::Operand::reg(c.reg)};
                push(in);
                return {r, node_type};
            }
            case IntrinsicKind::Barrier:
                throw LoweringError("barrier in expression position");
        }
        throw LoweringError("unreachable intrinsic kind");
    }

    // Address of element `index` (1-based) of a param array or shared decl:
    // base + (index - 1) * elem_size, all in i64.
    Value eval_address(const std::string& array, const Expr& index, ScalarType elem) {
        Value idx = eval(index);
        if (!is_int(idx.type)) throw LoweringError("non-integer index survived specialization");
        if (idx.type == ScalarType::I32) idx = convert(idx, ScalarType::I64);

        std::string one = fresh_reg(ScalarType::I64);
        emit_mov(one, ScalarType::I64, vptx::Operand::imm_int(1));
        std::string zero_based = fresh_reg(ScalarType::I64);
        emit3(vptx::Opcode::Sub, ScalarType::I64, zero_based, idx.reg, one);

        std::string size = fresh_reg(ScalarType::I64);
        emit_mov(size, ScalarType::I64, vptx::Operand::imm_int(static_cast<std::int64_t>(scalar_size(elem))));
        std::string offset = fresh_reg(ScalarType::I64);
        emit3(vptx::Opcode::Mul, ScalarType::I64, offset, zero_based, size);

        std::string base = fresh_reg(ScalarType::I64);
        emit_mov(base, ScalarType::I64, vptx::Operand::symbol(array));
        std::string addr = fresh_reg(ScalarType::I64);
        emit3(vptx::Opcode::Add, ScalarType::I64, addr, base, offset);
        return {addr, ScalarType::I64};
    }

    // ---- helpers --------------------------------------------------------------

    Value widen_to(Value v, ScalarType t) {
        if (v.type == t) return v;
        if (scalar_size(v.type) > scalar_size(t) || is_int(v.type) != is_int(t))
            throw LoweringError("implicit conversion is not a widening");
        return convert(v, t);
    }

    Value convert(Value v, ScalarType t) {
        std::string r = fresh_reg(t);
        vptx::Instr in;
        in.op = vptx::Opcode::Cvt;
        in.type = t;
        in.type2 = v.type;
        in.ops = {vptx::Operand::reg(r), vptx::Operand::reg(v.reg)};
        push(in);
        return {r, t};
    }

    ScalarType array_elem(const std::string& name) {
        for (std::size_t i = 0; i < tk_.ast.params.size(); ++i)
            if (tk_.ast.params[i] == name) return tk_.signature.arg_types[i].elem;
        for (const auto& d : tk_.ast.shared_decls)
            if (d.name == name) return d.elem;
        throw LoweringError("unknown array '" + name + "'");
    }

    vptx::Space space_of(const std::string& name) {
        for (const auto& d : tk_.ast.shared_decls)
            if (d.name == name) return vptx::Space::Shared;
        return vptx::Space::Global;
    }

    static vptx::Opcode arith_of(BinOp op) {
        switch (op) {
            case BinOp::Add: return vptx::Opcode::Add;
            case BinOp::Sub: return vptx::Opcode::Sub;
            case BinOp::Mul: return vptx::Opcode::Mul;
            case BinOp::Div: return vptx::Opcode::Div;
            case BinOp::Rem: return vptx::Opcode::Rem;
            default: throw LoweringError("not an arithmetic op");
        }
    }

    static vptx::CmpOp cmp_of(BinOp op) {
        switch (op) {
            case BinOp::Eq: return vptx::CmpOp::Eq;
            case BinOp::Ne: return vptx::CmpOp::Ne;
            case BinOp::Lt: return vptx::CmpOp::Lt;
            case BinOp::Le: return vptx::CmpOp::Le;
            case BinOp::Gt: return vptx::CmpOp::Gt;
            case BinOp::Ge: return vptx::CmpOp::Ge;
            default: throw LoweringError("not a comparison");
        }
    }

    static vptx::Opcode math_unary_of(const std::string& name) {
        if (name == "sqrt") return vptx::Opcode::Sqrt;
        if (name == "sin") return vptx::Opcode::Sin;
        if (name == "cos") return vptx::Opcode::Cos;
        if (name == "exp") return vptx::Opcode::Exp;
        if (name == "log") return vptx::Opcode::Log;
        if (name == "abs") return vptx::Opcode::Abs;
        throw LoweringError("unknown math intrinsic '" + name + "'");
    }

    std::string fresh_reg(ScalarType t) {
        std::string name = "%r" + std::to_string(next_reg_++);
        kernel_->regs.push_back(vptx::RegDecl{name, t});
        return name;
    }

    std::string fresh_pred() {
        std::string name = "%p" + std::to_string(next_pred_++);
        kernel_->regs.push_back(vptx::RegDecl{name, ScalarType::Pred});
        return name;
    }

    std::string local_reg(const std::string& name, ScalarType t) {
        auto it = local_regs_.find(name);
        if (it != local_regs_.end()) return it->second;
        std::string reg = t == ScalarType::Pred ? fresh_pred() : fresh_reg(t);
        local_regs_.emplace(name, reg);
        return reg;
    }

    void emit_mov(const std::string& dst, ScalarType t, vptx::Operand src) {
        vptx::Instr in;
        in.op = vptx::Opcode::Mov;
        in.type = t;
        in.ops = {vptx::Operand::reg(dst), std::move(src)};
        push(in);
    }

    void emit0(vptx::Opcode op) {
        vptx::Instr in;
        in.op = op;
        push(in);
    }

    void emit2(vptx::Opcode op, ScalarType t, const std::string& dst, const std::string& src) {
        vptx::Instr in;
        in.op = op;
        in.type = t;
        in.ops = {vptx::Operand::reg(dst), vptx::Operand::reg(src)};
        push(in);
    }

    void emit3(vptx::Opcode op, ScalarType t, const std::string& dst, const std::string& a,
               const std::string& b) {
        vptx::Instr in;
        in.op = op;
        in.type = t;
        in.ops = {vptx::Operand::reg(dst), vptx::Operand::reg(a), vptx::Operand::reg(b)};
        push(in);
    }

    void emit_bra(const std::string& label) {
        vptx::Instr in;
        in.op = vptx::Opcode::Bra;
        in.label = label;
        push(in);
    }

    void emit_branch_if(const std::string& pred, const std::string& label) {
        vptx::Instr in;
        in.op = vptx::Opcode::BraPred;
        in.label = label;
        in.ops = {vptx::Operand::reg(pred)};
        push(in);
    }

    void emit_label(const std::string& label) {
        vptx::Instr in;
        in.op = vptx::Opcode::Label;
        in.label = label;
        push(in);
    }

    void push(const vptx::Instr& in) { kernel_->body.push_back(in); }

    const TypedKernel& tk_;
    vptx::Kernel* kernel_ = nullptr;
    std::map<std::string, std::string> local_regs_;
    int next_reg_ = 0;
    int next_pred_ = 0;
    int next_label_ = 0;
};

}  // namespace detail

// Lowers a typed kernel to a single-kernel module named
// `<kernel>$<signature-hash>`. Pure and deterministic; the result always
// passes vptx::validate.
inline vptx::Module lower(const TypedKernel& tk) {
    detail::Lowerer l(tk);
    return l.run();
}

// Canonical text for a module; vptx::parse(disassemble(m)) == m.
inline std::string disassemble(const vptx::Module& m) { return vptx::print(m); }

}  // namespace gridjit
