// SPDX-License-Identifier: Apache-2.0
//
// Seeded random-input generators for the property suites. Everything here is
// valid by construction: ASTs satisfy the frontend invariants (canonical
// form, definite assignment), VPTX modules pass validate() with forward-only
// branches, straight-line kernels type-check and index in bounds.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gridjit/ast.hpp"
#include "gridjit/intrinsics.hpp"
#include "gridjit/types.hpp"
#include "gridjit/vptx.hpp"

namespace gen {

using namespace gridjit;

using Rng = std::mt19937_64;

inline int pick(Rng& rng, int lo, int hi) {  // inclusive
    return static_cast<int>(std::uniform_int_distribution<int>(lo, hi)(rng));
}

inline bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

// ---- random untyped kernels (parse/print round trip) -------------------------

class AstGen {
  public:
    explicit AstGen(std::uint64_t seed) : rng_(seed) {}

    KernelAst generate(int index) {
        KernelAst k;
        k.name = "k" + std::to_string(index);
        int nparams = pick(rng_, 0, 4);
        for (int i = 0; i < nparams; ++i) k.params.push_back("p" + std::to_string(i));
        int nshared = pick(rng_, 0, 2);
        static constexpr ScalarType elems[] = {ScalarType::I32, ScalarType::I64, ScalarType::F32,
                                               ScalarType::F64};
        for (int i = 0; i < nshared; ++i)
            k.shared_decls.push_back(SharedDecl{"s" + std::to_string(i),
                                                elems[pick(rng_, 0, 3)],
                                                static_cast<std::uint32_t>(pick(rng_, 1, 64))});
        params_ = k.params;
        shareds_.clear();
        for (const auto& d : k.shared_decls) shareds_.push_back(d.name);
        assigned_.clear();
        next_local_ = 0;
        k.body = gen_body(2, true);
        k.renumber_exprs();
        return k;
    }

  private:
    std::vector<Stmt> gen_body(int depth, bool allow_return) {
        std::vector<Stmt> body;
        int n = pick(rng_, depth > 1 ? 1 : 0, 4);
        for (int i = 0; i < n; ++i) body.push_back(gen_stmt(depth));
        if (allow_return && chance(rng_, 0.15)) body.push_back(Stmt::return_());
        return body;
    }

    Stmt gen_stmt(int depth) {
        int roll = pick(rng_, 0, 99);
        if (depth > 0 && roll < 15) {
            Stmt s = Stmt::if_(gen_expr(2), save_restore([&] { return gen_body(depth - 1, false); }),
                               chance(rng_, 0.5) ? save_restore([&] { return gen_body(depth - 1, false); })
                                                 : std::vector<Stmt>{});
            return s;
        }
        if (depth > 0 && roll < 25)
            return Stmt::while_(gen_expr(2), save_restore([&] { return gen_body(depth - 1, false); }));
        if (roll < 35 && !(params_.empty() && shareds_.empty())) {
            std::string target = pick_array();
            return Stmt::store(target, gen_expr(2), gen_expr(2));
        }
        if (roll < 45) return Stmt::barrier();
        // Assign: fresh or existing local.
        std::string local = (!assigned_.empty() && chance(rng_, 0.4))
                                ? assigned_[static_cast<std::size_t>(pick(rng_, 0, int(assigned_.size()) - 1))]
                                : fresh_local();
        Stmt s = Stmt::assign(local, gen_expr(3));
        if (std::find(assigned_.begin(), assigned_.end(), local) == assigned_.end())
            assigned_.push_back(local);
        return s;
    }

    template <typename F>
    std::vector<Stmt> save_restore(F&& f) {
        // Branch-local assignments do not survive the construct; the
        // conservative pre-state keeps definite assignment airtight.
        auto saved = assigned_;
        auto body = f();
        assigned_ = std::move(saved);
        return body;
    }

    Expr gen_expr(int depth) {
        if (depth == 0) return gen_leaf();
        int roll = pick(rng_, 0, 99);
        if (roll < 35) {
            static constexpr BinOp ops[] = {BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem,
                                            BinOp::Eq,  BinOp::Ne,  BinOp::Lt,  BinOp::Le,  BinOp::Gt,
                                            BinOp::Ge,  BinOp::And, BinOp::Or};
            return Expr::binary(ops[pick(rng_, 0, 12)], gen_expr(depth - 1), gen_expr(depth - 1));
        }
        if (roll < 45) {
            Expr operand = gen_expr(depth - 1);
            UnOp op = chance(rng_, 0.5) ? UnOp::Neg : UnOp::Not;
            // Canonical form: the parser folds a sign into a literal.
            if (op == UnOp::Neg &&
                (operand.kind == Expr::Kind::IntLit || operand.kind == Expr::Kind::FloatLit))
                return gen_leaf();
            return Expr::unary(op, std::move(operand));
        }
        if (roll < 55) {
            static constexpr ScalarType types[] = {ScalarType::I32, ScalarType::I64, ScalarType::F32,
                                                   ScalarType::F64};
            return Expr::cast(types[pick(rng_, 0, 3)], gen_expr(depth - 1));
        }
        if (roll < 70) return gen_intrinsic(depth);
        if (roll < 85 && !(params_.empty() && shareds_.empty()))
            return Expr::load(pick_array(), gen_expr(depth - 1));
        return gen_leaf();
    }

    Expr gen_intrinsic(int depth) {
        // Anything from the table except barrier.
        while (true) {
            const IntrinsicInfo& info = kIntrinsics[static_cast<std::size_t>(pick(rng_, 0, int(kIntrinsics.size()) - 1))];
            if (info.kind == IntrinsicKind::Barrier) continue;
            std::vector<Expr> args;
            for (int i = 0; i < info.arity; ++i) args.push_back(gen_expr(depth - 1));
            return Expr::intrinsic(std::string(info.name), std::move(args));
        }
    }

    Expr gen_leaf() {
        int roll = pick(rng_, 0, 99);
        if (roll < 35) {
            std::int64_t v = chance(rng_, 0.1) ? std::int64_t(rng_()) : pick(rng_, -1000, 1000);
            return Expr::int_lit(v);
        }
        if (roll < 55) {
            double v;
            if (chance(rng_, 0.2)) {
                // Arbitrary finite bit patterns to stress shortest round trip.
                do {
                    v = std::bit_cast<double>(rng_());
                } while (!std::isfinite(v));
            } else {
                v = std::uniform_real_distribution<double>(-1e4, 1e4)(rng_);
            }
            return Expr::float_lit(v);
        }
        if (roll < 80 && !assigned_.empty())
            return Expr::var(assigned_[static_cast<std::size_t>(pick(rng_, 0, int(assigned_.size()) - 1))]);
        if (!params_.empty())
            return Expr::var(params_[static_cast<std::size_t>(pick(rng_, 0, int(params_.size()) - 1))]);
        return Expr::int_lit(pick(rng_, 0, 9));
    }

    std::string pick_array() {
        std::vector<std::string> all = params_;
        all.insert(all.end(), shareds_.begin(), shareds_.end());
        return all[static_cast<std::size_t>(pick(rng_, 0, int(all.size()) - 1))];
    }

    std::string fresh_local() { return "v" + std::to_string(next_local_++); }

    Rng rng_;
    std::vector<std::string> params_;
    std::vector<std::string> shareds_;
    std::vector<std::string> assigned_;
    int next_local_ = 0;
};

// A kernel whose local acquires incompatible types on two branches, wrapped
// in random benign structure. specialize() must abort with UnresolvedType.
inline KernelAst conflict_kernel(Rng& rng) {
    KernelAst k;
    k.name = "conflict";
    k.params = {"a", "out"};
    std::vector<Stmt> inner;
    bool int_first = chance(rng, 0.5);
    Expr int_lit = Expr::int_lit(pick(rng, 1, 100));
    Expr float_lit = Expr::float_lit(1.5);
    std::vector<Stmt> then_body, else_body;
    then_body.push_back(Stmt::assign("x", int_first ? int_lit : float_lit));
    else_body.push_back(Stmt::assign("x", int_first ? float_lit : int_lit));
    Expr cond = Expr::binary(BinOp::Gt, Expr::load("a", Expr::int_lit(1)), Expr::float_lit(0.0));
    inner.push_back(Stmt::if_(std::move(cond), std::move(then_body), std::move(else_body)));
    inner.push_back(Stmt::store("out", Expr::int_lit(1), Expr::var("x")));
    if (chance(rng, 0.5)) {
        // Nest inside an extra loop for structural variety.
        std::vector<Stmt> outer;
        outer.push_back(Stmt::assign("i", Expr::int_lit(1)));
        std::vector<Stmt> loop_body = std::move(inner);
        loop_body.push_back(Stmt::assign("i", Expr::binary(BinOp::Add, Expr::var("i"), Expr::int_lit(1))));
        outer.push_back(Stmt::while_(Expr::binary(BinOp::Lt, Expr::var("i"), Expr::int_lit(3)),
                                     std::move(loop_body)));
        k.body = std::move(outer);
    } else {
        k.body = std::move(inner);
    }
    k.renumber_exprs();
    return k;
}

// ---- random VPTX modules ------------------------------------------------------

class ModuleGen {
  public:
    explicit ModuleGen(std::uint64_t seed) : rng_(seed) {}

    vptx::Module generate(int index) {
        vptx::Module m;
        m.name = "m" + std::to_string(index);
        int nk = pick(rng_, 1, 2);
        for (int i = 0; i < nk; ++i) m.kernels.push_back(gen_kernel("k" + std::to_string(i)));
        return m;
    }

  private:
    vptx::Kernel gen_kernel(std::string name) {
        vptx::Kernel k;
        k.name = std::move(name);
        regs_by_type_.clear();
        if (chance(rng_, 0.4))
            k.shared.push_back(vptx::SharedArray{"buf", ScalarType::F32, static_cast<std::uint32_t>(pick(rng_, 4, 32))});

        // One register of each scalar class guarantees every instruction form
        // has usable operands; extras add variety.
        static constexpr ScalarType all[] = {ScalarType::I32, ScalarType::I64, ScalarType::F32,
                                             ScalarType::F64, ScalarType::Pred};
        int idx = 0;
        for (ScalarType t : all) add_reg(k, t, idx);
        int extra = pick(rng_, 0, 6);
        for (int i = 0; i < extra; ++i) add_reg(k, all[pick(rng_, 0, 4)], idx);

        int n = pick(rng_, 4, 24);
        std::set<int> label_slots;
        for (int i = 1; i < n; ++i)
            if (chance(rng_, 0.15)) label_slots.insert(i);

        for (int i = 0; i < n; ++i) {
            if (label_slots.count(i)) {
                vptx::Instr lab;
                lab.op = vptx::Opcode::Label;
                lab.label = "L" + std::to_string(i);
                k.body.push_back(lab);
            }
            // Branches only jump forward, so every execution terminates.
            std::vector<std::string> forward;
            for (int j : label_slots)
                if (j > i) forward.push_back("L" + std::to_string(j));
            k.body.push_back(gen_instr(k, forward));
        }
        vptx::Instr ret;
        ret.op = vptx::Opcode::Ret;
        k.body.push_back(ret);
        return k;
    }

    void add_reg(vptx::Kernel& k, ScalarType t, int& idx) {
        std::string prefix = t == ScalarType::Pred ? "%p" : "%r";
        k.regs.push_back(vptx::RegDecl{prefix + std::to_string(idx++), t});
        regs_by_type_[t].push_back(k.regs.back().name);
    }

    std::string any_reg(ScalarType t) {
        const auto& v = regs_by_type_[t];
        return v[static_cast<std::size_t>(pick(rng_, 0, int(v.size()) - 1))];
    }

    ScalarType any_numeric() {
        static constexpr ScalarType nums[] = {ScalarType::I32, ScalarType::I64, ScalarType::F32,
                                              ScalarType::F64};
        return nums[pick(rng_, 0, 3)];
    }

    vptx::Instr gen_instr(vptx::Kernel& k, const std::vector<std::string>& forward_labels) {
        using vptx::Opcode;
        vptx::Instr in;
        int roll = pick(rng_, 0, 99);
        if (roll < 25) {  // mov with a random source form
            ScalarType t = any_numeric();
            in.op = Opcode::Mov;
            in.type = t;
            in.ops.push_back(vptx::Operand::reg(any_reg(t)));
            int src = pick(rng_, 0, 3);
            if (src == 0) {
                in.ops.push_back(vptx::Operand::reg(any_reg(t)));
            } else if (src == 1) {
                if (is_int(t))
                    in.ops.push_back(vptx::Operand::imm_int(pick(rng_, -1000, 1000)));
                else if (t == ScalarType::F32)
                    in.ops.push_back(vptx::Operand::imm_f32(static_cast<float>(pick(rng_, -100, 100)) / 3.0f));
                else
                    in.ops.push_back(vptx::Operand::imm_f64(static_cast<double>(pick(rng_, -100, 100)) / 3.0));
            } else if (src == 2 && t == ScalarType::I32) {
                vptx::Special sp;
                sp.family = static_cast<vptx::Special::Family>(pick(rng_, 0, 3));
                sp.axis = pick(rng_, 0, 2);
                in.ops.push_back(vptx::Operand::special(sp));
            } else if (!k.shared.empty() && t == ScalarType::I64) {
                in.ops.push_back(vptx::Operand::symbol(k.shared[0].name));
            } else {
                in.ops.push_back(vptx::Operand::reg(any_reg(t)));
            }
            return in;
        }
        if (roll < 45) {  // arithmetic
            ScalarType t = any_numeric();
            static constexpr Opcode ops[] = {Opcode::Add, Opcode::Sub, Opcode::Mul, Opcode::Div, Opcode::Min,
                                             Opcode::Max};
            in.op = ops[pick(rng_, 0, 5)];
            in.type = t;
            in.ops = {vptx::Operand::reg(any_reg(t)), vptx::Operand::reg(any_reg(t)),
                      vptx::Operand::reg(any_reg(t))};
            return in;
        }
        if (roll < 50) {  // rem, integer only
            ScalarType t = chance(rng_, 0.5) ? ScalarType::I32 : ScalarType::I64;
            in.op = Opcode::Rem;
            in.type = t;
            in.ops = {vptx::Operand::reg(any_reg(t)), vptx::Operand::reg(any_reg(t)),
                      vptx::Operand::reg(any_reg(t))};
            return in;
        }
        if (roll < 60) {  // setp
            ScalarType t = any_numeric();
            in.op = Opcode::Setp;
            in.cmp = static_cast<vptx::CmpOp>(pick(rng_, 0, 5));
            in.type = t;
            in.ops = {vptx::Operand::reg(any_reg(ScalarType::Pred)), vptx::Operand::reg(any_reg(t)),
                      vptx::Operand::reg(any_reg(t))};
            return in;
        }
        if (roll < 67) {  // cvt between distinct numeric types
            ScalarType a = any_numeric(), b = any_numeric();
            while (b == a) b = any_numeric();
            in.op = Opcode::Cvt;
            in.type = a;
            in.type2 = b;
            in.ops = {vptx::Operand::reg(any_reg(a)), vptx::Operand::reg(any_reg(b))};
            return in;
        }
        if (roll < 74) {  // pred logic
            static constexpr Opcode ops[] = {Opcode::And, Opcode::Or, Opcode::Xor, Opcode::Not};
            in.op = ops[pick(rng_, 0, 3)];
            in.type = ScalarType::Pred;
            in.ops.push_back(vptx::Operand::reg(any_reg(ScalarType::Pred)));
            in.ops.push_back(vptx::Operand::reg(any_reg(ScalarType::Pred)));
            if (in.op != Opcode::Not) in.ops.push_back(vptx::Operand::reg(any_reg(ScalarType::Pred)));
            return in;
        }
        if (roll < 80) {  // float math
            ScalarType t = chance(rng_, 0.5) ? ScalarType::F32 : ScalarType::F64;
            static constexpr Opcode ops[] = {Opcode::Sqrt, Opcode::Sin, Opcode::Cos, Opcode::Exp, Opcode::Log,
                                             Opcode::Abs};
            in.op = ops[pick(rng_, 0, 5)];
            in.type = t;
            in.ops = {vptx::Operand::reg(any_reg(t)), vptx::Operand::reg(any_reg(t))};
            return in;
        }
        if (roll < 84) {  // fma
            ScalarType t = chance(rng_, 0.5) ? ScalarType::F32 : ScalarType::F64;
            in.op = Opcode::Fma;
            in.type = t;
            in.ops = {vptx::Operand::reg(any_reg(t)), vptx::Operand::reg(any_reg(t)),
                      vptx::Operand::reg(any_reg(t)), vptx::Operand::reg(any_reg(t))};
            return in;
        }
        if (roll < 92 && !k.shared.empty()) {  // shared memory op (may trap out of bounds)
            bool load = chance(rng_, 0.5);
            in.op = load ? Opcode::Ld : Opcode::St;
            in.space = vptx::Space::Shared;
            in.type = ScalarType::F32;
            std::string addr = any_reg(ScalarType::I64);
            std::string data = any_reg(ScalarType::F32);
            if (load) in.ops = {vptx::Operand::reg(data), vptx::Operand::reg(addr)};
            else in.ops = {vptx::Operand::reg(addr), vptx::Operand::reg(data)};
            return in;
        }
        if (roll < 96 && !forward_labels.empty()) {  // forward branch
            in.label = forward_labels[static_cast<std::size_t>(pick(rng_, 0, int(forward_labels.size()) - 1))];
            if (chance(rng_, 0.5)) {
                in.op = Opcode::Bra;
            } else {
                in.op = Opcode::BraPred;
                in.ops.push_back(vptx::Operand::reg(any_reg(ScalarType::Pred)));
            }
            return in;
        }
        // Fallback: a benign mov.
        in.op = Opcode::Mov;
        in.type = ScalarType::I32;
        in.ops = {vptx::Operand::reg(any_reg(ScalarType::I32)), vptx::Operand::imm_int(pick(rng_, 0, 99))};
        return in;
    }

    Rng rng_;
    std::map<ScalarType, std::vector<std::string>> regs_by_type_;
};

// ---- random straight-line kernels (differential oracle) ----------------------

struct StraightLineCase {
    KernelAst kernel;
    ScalarType elem;
    std::size_t elements;  // per array; equals grid*block thread count
};

class StraightLineGen {
  public:
    explicit StraightLineGen(std::uint64_t seed) : rng_(seed) {}

    Rng& rng() { return rng_; }

    StraightLineCase generate(int index, std::size_t elements) {
        static constexpr ScalarType types[] = {ScalarType::I32, ScalarType::I64, ScalarType::F32,
                                               ScalarType::F64};
        elem_ = types[pick(rng_, 0, 3)];
        KernelAst k;
        k.name = "sl" + std::to_string(index);
        k.params = {"in0", "in1", "out"};

        // i = (block_id_x() - 1) * num_threads_x() + thread_id_x()  -> 1..N
        Expr gid = Expr::binary(
            BinOp::Add,
            Expr::binary(BinOp::Mul,
                         Expr::binary(BinOp::Sub, Expr::intrinsic("block_id_x"), Expr::int_lit(1)),
                         Expr::intrinsic("num_threads_x")),
            Expr::intrinsic("thread_id_x"));
        k.body.push_back(Stmt::assign("i", std::move(gid)));

        locals_.clear();
        int steps = pick(rng_, 1, 4);
        for (int s = 0; s < steps; ++s) {
            std::string name = "t" + std::to_string(s);
            k.body.push_back(Stmt::assign(name, gen_value_expr(2)));
            locals_.push_back(name);
        }
        k.body.push_back(Stmt::store("out", Expr::var("i"), gen_value_expr(1)));
        k.renumber_exprs();
        return StraightLineCase{std::move(k), elem_, elements};
    }

  private:
    // An expression of exactly the element family type.
    Expr gen_value_expr(int depth) {
        if (depth == 0) return gen_value_leaf();
        int roll = pick(rng_, 0, 99);
        if (roll < 40) {
            static constexpr BinOp ops[] = {BinOp::Add, BinOp::Sub, BinOp::Mul};
            BinOp op = ops[pick(rng_, 0, 2)];
            return Expr::binary(op, gen_value_expr(depth - 1), gen_value_expr(depth - 1));
        }
        if (roll < 48 && is_float(elem_))  // float division is total
            return Expr::binary(BinOp::Div, gen_value_expr(depth - 1), gen_value_expr(depth - 1));
        if (roll < 48 && is_int(elem_))  // integer div/rem by a nonzero literal
            return Expr::binary(chance(rng_, 0.5) ? BinOp::Div : BinOp::Rem, gen_value_expr(depth - 1),
                                typed_literal(pick(rng_, 1, 9)));
        if (roll < 58) {
            std::string op = chance(rng_, 0.5) ? "min" : "max";
            return Expr::intrinsic(op, make_args(gen_value_expr(depth - 1), gen_value_expr(depth - 1)));
        }
        if (roll < 64) return Expr::intrinsic("abs", make_args(gen_value_expr(depth - 1)));
        if (roll < 72 && is_float(elem_)) {
            static const char* fns[] = {"sqrt", "sin", "cos", "exp", "log"};
            return Expr::intrinsic(fns[pick(rng_, 0, 4)], make_args(gen_value_expr(depth - 1)));
        }
        if (roll < 78 && is_float(elem_))
            return Expr::intrinsic("fma", make_args(gen_value_expr(depth - 1), gen_value_expr(depth - 1),
                                                    gen_value_expr(depth - 1)));
        if (roll < 86) {
            // Cross-family round trip through an explicit cast.
            ScalarType other = is_int(elem_) ? (chance(rng_, 0.5) ? ScalarType::F32 : ScalarType::F64)
                                             : (chance(rng_, 0.5) ? ScalarType::I32 : ScalarType::I64);
            return Expr::cast(elem_, Expr::cast(other, gen_value_expr(depth - 1)));
        }
        if (roll < 93) return Expr::unary(UnOp::Neg, gen_value_expr(depth - 1));
        return gen_value_leaf();
    }

    Expr gen_value_leaf() {
        int roll = pick(rng_, 0, 99);
        if (roll < 35) return Expr::load(chance(rng_, 0.5) ? "in0" : "in1", Expr::var("i"));
        if (roll < 55 && !locals_.empty())
            return Expr::var(locals_[static_cast<std::size_t>(pick(rng_, 0, int(locals_.size()) - 1))]);
        if (roll < 75) return typed_literal(pick(rng_, -20, 20));
        if (roll < 85 && is_int(elem_)) {
            // Thread coordinates are i32; widen explicitly for i64 kernels.
            Expr coord = Expr::intrinsic("thread_id_x");
            return elem_ == ScalarType::I32 ? coord : Expr::cast(ScalarType::I64, std::move(coord));
        }
        return typed_literal(pick(rng_, 1, 9));
    }

    // A literal of exactly the element type (wrapped in a cast where the
    // default literal type differs).
    Expr typed_literal(int v) {
        switch (elem_) {
            case ScalarType::I32: return Expr::int_lit(v);
            case ScalarType::I64: return Expr::cast(ScalarType::I64, Expr::int_lit(v));
            case ScalarType::F32: return Expr::cast(ScalarType::F32, Expr::float_lit(v + 0.25));
            case ScalarType::F64: return Expr::float_lit(v + 0.25);
            default: return Expr::int_lit(v);
        }
    }

    static std::vector<Expr> make_args(Expr a) {
        std::vector<Expr> v;
        v.push_back(std::move(a));
        return v;
    }
    static std::vector<Expr> make_args(Expr a, Expr b) {
        std::vector<Expr> v;
        v.push_back(std::move(a));
        v.push_back(std::move(b));
        return v;
    }
    static std::vector<Expr> make_args(Expr a, Expr b, Expr c) {
        std::vector<Expr> v;
        v.push_back(std::move(a));
        v.push_back(std::move(b));
        v.push_back(std::move(c));
        return v;
    }

    Rng rng_;
    ScalarType elem_ = ScalarType::F32;
    std::vector<std::string> locals_;
};

}  // namespace gen
