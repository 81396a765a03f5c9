// SPDX-License-Identifier: Apache-2.0
//
// VPTX: the textual virtual ISA consumed by the driver. In-memory form,
// parser, canonical printer, and validator. docs/vptx-isa.md is the
// normative format reference.
//
// Phase split: parse() is purely syntactic (undefined labels or type
// mismatches still parse); validate() checks every structural and typing
// invariant and returns diagnostics; run-time bounds live in the emulator.
#pragma once

#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gridjit/errors.hpp"
#include "gridjit/types.hpp"

namespace gridjit::vptx {

enum class Opcode : std::uint8_t {
    Mov, Add, Sub, Mul, Div, Rem, Neg,
    And, Or, Xor, Not,
    Setp, Cvt,
    Ld, St,
    Bra, BraPred, BarSync,
    Sqrt, Sin, Cos, Exp, Log, Abs, Min, Max, Fma,
    Trap, Ret,
    Label,  // pseudo-op: a label interleaved in the body
};

enum class CmpOp : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge };
enum class Space : std::uint8_t { Global, Shared };

constexpr std::string_view cmp_name(CmpOp c) {
    switch (c) {
        case CmpOp::Eq: return "eq";
        case CmpOp::Ne: return "ne";
        case CmpOp::Lt: return "lt";
        case CmpOp::Le: return "le";
        case CmpOp::Gt: return "gt";
        case CmpOp::Ge: return "ge";
    }
    return "?";
}

constexpr std::string_view space_name(Space s) { return s == Space::Global ? "global" : "shared"; }

// The twelve special registers, all i32 and 0-indexed at ISA level.
struct Special {
    enum class Family : std::uint8_t { Tid, Ctaid, Ntid, Nctaid };
    Family family = Family::Tid;
    int axis = 0;  // 0..2 = x..z

    friend bool operator==(const Special&, const Special&) = default;

    std::string to_string() const {
        static constexpr std::string_view names[] = {"%tid", "%ctaid", "%ntid", "%nctaid"};
        static constexpr char axes[] = {'x', 'y', 'z'};
        return std::string(names[static_cast<int>(family)]) + "." + axes[axis];
    }

    static std::optional<Special> parse(std::string_view text) {
        Special s;
        std::string_view rest;
        if (text.starts_with("%tid.")) { s.family = Family::Tid; rest = text.substr(5); }
        else if (text.starts_with("%ctaid.")) { s.family = Family::Ctaid; rest = text.substr(7); }
        else if (text.starts_with("%ntid.")) { s.family = Family::Ntid; rest = text.substr(6); }
        else if (text.starts_with("%nctaid.")) { s.family = Family::Nctaid; rest = text.substr(8); }
        else return std::nullopt;
        if (rest == "x") s.axis = 0;
        else if (rest == "y") s.axis = 1;
        else if (rest == "z") s.axis = 2;
        else return std::nullopt;
        return s;
    }
};

struct Operand {
    enum class Kind : std::uint8_t {
        Reg,       // %name
        ImmInt,    // decimal
        ImmFloat,  // 0f######## / 0d################ (bit patterns)
        Special,   // %tid.x etc
        Symbol,    // bare identifier: param or shared base (resolved at validate/run time)
    };

    Kind kind = Kind::Reg;
    std::string name;          // Reg / Symbol
    std::int64_t ival = 0;     // ImmInt
    double fval = 0.0;         // ImmFloat (exact; f32 patterns widen losslessly)
    bool f32_pattern = false;  // ImmFloat came from / prints as the 0f form
    Special spec;

    static Operand reg(std::string name) {
        Operand o;
        o.kind = Kind::Reg;
        o.name = std::move(name);
        return o;
    }
    static Operand imm_int(std::int64_t v) {
        Operand o;
        o.kind = Kind::ImmInt;
        o.ival = v;
        return o;
    }
    static Operand imm_f32(float v) {
        Operand o;
        o.kind = Kind::ImmFloat;
        o.fval = static_cast<double>(v);
        o.f32_pattern = true;
        return o;
    }
    static Operand imm_f64(double v) {
        Operand o;
        o.kind = Kind::ImmFloat;
        o.fval = v;
        return o;
    }
    static Operand special(Special s) {
        Operand o;
        o.kind = Kind::Special;
        o.spec = s;
        return o;
    }
    static Operand symbol(std::string name) {
        Operand o;
        o.kind = Kind::Symbol;
        o.name = std::move(name);
        return o;
    }

    friend bool operator==(const Operand& a, const Operand& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case Kind::Reg:
            case Kind::Symbol: return a.name == b.name;
            case Kind::ImmInt: return a.ival == b.ival;
            case Kind::ImmFloat:
                return a.f32_pattern == b.f32_pattern &&
                       std::bit_cast<std::uint64_t>(a.fval) == std::bit_cast<std::uint64_t>(b.fval);
            case Kind::Special: return a.spec == b.spec;
        }
        return false;
    }
};

struct Instr {
    Opcode op = Opcode::Ret;
    ScalarType type = ScalarType::I32;   // .t suffix; Cvt: destination type
    ScalarType type2 = ScalarType::I32;  // Cvt: source type
    CmpOp cmp = CmpOp::Eq;               // Setp
    Space space = Space::Global;         // Ld / St
    std::vector<Operand> ops;            // destination first where present
    std::string label;                   // Bra / BraPred target; Label name
    std::int64_t trap_code = 0;          // Trap
    int line = 0;                        // source line (diagnostics only)

    friend bool operator==(const Instr& a, const Instr& b) {
        if (a.op != b.op) return false;
        switch (a.op) {
            case Opcode::Label:
            case Opcode::Bra: return a.label == b.label;
            case Opcode::BraPred: return a.label == b.label && a.ops == b.ops;
            case Opcode::Trap: return a.trap_code == b.trap_code;
            case Opcode::Ret:
            case Opcode::BarSync: return true;
            case Opcode::Setp: return a.cmp == b.cmp && a.type == b.type && a.ops == b.ops;
            case Opcode::Cvt: return a.type == b.type && a.type2 == b.type2 && a.ops == b.ops;
            case Opcode::Ld:
            case Opcode::St: return a.space == b.space && a.type == b.type && a.ops == b.ops;
            default: return a.type == b.type && a.ops == b.ops;
        }
    }
};

enum class ParamKind : std::uint8_t { Scalar, Pointer };

struct Param {
    std::string name;
    ParamKind kind = ParamKind::Scalar;
    ScalarType type = ScalarType::I32;  // scalar type, or pointee element type

    friend bool operator==(const Param&, const Param&) = default;

    std::string type_text() const {
        if (kind == ParamKind::Scalar) return std::string(scalar_name(type));
        return "ptr.global." + std::string(scalar_name(type));
    }
};

struct SharedArray {
    std::string name;
    ScalarType elem = ScalarType::F32;
    std::uint32_t count = 0;

    friend bool operator==(const SharedArray&, const SharedArray&) = default;
};

struct RegDecl {
    std::string name;  // includes the leading %
    ScalarType type = ScalarType::I32;

    friend bool operator==(const RegDecl&, const RegDecl&) = default;
};

struct Kernel {
    std::string name;
    std::vector<Param> params;
    std::vector<SharedArray> shared;
    std::vector<RegDecl> regs;
    std::vector<Instr> body;

    friend bool operator==(const Kernel&, const Kernel&) = default;
};

struct Module {
    std::string name;
    std::vector<Kernel> kernels;

    friend bool operator==(const Module&, const Module&) = default;

    const Kernel* find_kernel(std::string_view kname) const {
        for (const auto& k : kernels)
            if (k.name == kname) return &k;
        return nullptr;
    }
};

struct Diagnostic {
    std::string kernel;
    int instr_index = -1;  // -1: kernel-level problem
    std::string message;

    std::string to_string() const {
        std::string s = kernel.empty() ? std::string("module") : ("kernel '" + kernel + "'");
        if (instr_index >= 0) s += ", instruction " + std::to_string(instr_index);
        return s + ": " + message;
    }
};

// ---- printing ---------------------------------------------------------------

namespace detail {

inline std::string format_imm(const Operand& o) {
    if (o.kind == Operand::Kind::ImmInt) return std::to_string(o.ival);
    char buf[20];
    if (o.f32_pattern) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(o.fval));
        std::snprintf(buf, sizeof(buf), "0f%08X", bits);
    } else {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(o.fval);
        std::snprintf(buf, sizeof(buf), "0d%016llX", static_cast<unsigned long long>(bits));
    }
    return buf;
}

inline std::string operand_text(const Operand& o) {
    switch (o.kind) {
        case Operand::Kind::Reg:
        case Operand::Kind::Symbol: return o.name;
        case Operand::Kind::Special: return o.spec.to_string();
        case Operand::Kind::ImmInt:
        case Operand::Kind::ImmFloat: return format_imm(o);
    }
    return "?";
}

inline std::string instr_text(const Instr& in) {
    auto opnd = [&](std::size_t i) { return operand_text(in.ops[i]); };
    std::string t{scalar_name(in.type)};
    switch (in.op) {
        case Opcode::Mov: return "mov." + t + " " + opnd(0) + ", " + opnd(1);
        case Opcode::Add: return "add." + t + " " + opnd(0) + ", " + opnd(1) + ", " + opnd(2);
        case Opcode::Sub: return "sub." + t + " " + opnd(0) + ", " + opnd(1) + ", " + opnd(2);
        case Opcode::Mul: return "mul." + t + " " + opnd(0) + ", " + opnd(1) + ", " + opnd(2);
        case Opcode::Div: return "div." + t + " " + opnd(0) + ", " + opnd(1) + ", " + opnd(2);
        case Opcode::Rem: return "rem." + t + " " + opnd(0) + ", " + opnd(1) + ", " + opnd(2);
        case Opcode::Neg: return "neg." + t + " " + opnd(0) + ", " + opnd(1);
        case Opcode::And: return "and.pred " + opnd(0) + ", " + opnd(1) + ", " + opnd(2);
        case Opcode::Or: return "or.pred " + opnd(0) + ", " + opnd(1) + ", " + opnd(2);
        case Opcode::Xor: return "xor.pred " + opnd(0) + ", " + opnd(1) + ", " + opnd(2);
        case Opcode::Not: return "not.pred " + opnd(0) + ", " + opnd(1);
        case Opcode::Setp:
            return "setp." + std::string(cmp_name(in.cmp)) + "." + t + " " + opnd(0) + ", " + opnd(1) + ", " +
                   opnd(2);
        case Opcode::Cvt:
            return "cvt." + t + "." + std::string(scalar_name(in.type2)) + " " + opnd(0) + ", " + opnd(1);
        case Opcode::Ld:
            return "ld." + std::string(space_name(in.space)) + "." + t + " " + opnd(0) + ", [" + opnd(1) + "]";
        case Opcode::St:
            return "st." + std::string(space_name(in.space)) + "." + t + " [" + opnd(0) + "], " + opnd(1);
        case Opcode::Bra: return "bra " + in.label;
        case Opcode::BraPred: return "bra.p " + opnd(0) + ", " + in.label;
        case Opcode::BarSync: return "bar.sync";
        case Opcode::Sqrt: return "sqrt." + t + " " + opnd(0) + ", " + opnd(1);
        case Opcode::Sin: return "sin." + t + " " + opnd(0) + ", " + opnd(1);
        case Opcode::Cos: return "cos." + t + " " + opnd(0) + ", " + opnd(1);
        case Opcode::Exp: return "exp." + t + " " + opnd(0) + ", " + opnd(1);
        case Opcode::Log: return "log." + t + " " + opnd(0) + ", " + opnd(1);
        case Opcode::Abs: return "abs." + t + " " + opnd(0) + ", " + opnd(1);
        case Opcode::Min: return "min." + t + " " + opnd(0) + ", " + opnd(1) + ", " + opnd(2);
        case Opcode::Max: return "max." + t + " " + opnd(0) + ", " + opnd(1) + ", " + opnd(2);
        case Opcode::Fma:
            return "fma." + t + " " + opnd(0) + ", " + opnd(1) + ", " + opnd(2) + ", " + opnd(3);
        case Opcode::Trap: return "trap " + std::to_string(in.trap_code);
        case Opcode::Ret: return "ret";
        case Opcode::Label: return in.label + ":";
    }
    return "?";
}

}  // namespace detail

// Canonical text: one instruction per line, two-space indent inside kernels,
// labels flush left, comments stripped. print(parse(text)) is idempotent.
inline std::string print(const Module& m) {
    std::string out = ".module " + m.name + "\n";
    for (const auto& k : m.kernels) {
        out += ".kernel " + k.name + "(";
        for (std::size_t i = 0; i < k.params.size(); ++i) {
            if (i) out += ", ";
            out += ".param " + k.params[i].type_text() + " " + k.params[i].name;
        }
        out += ") {\n";
        for (const auto& s : k.shared)
            out += "  .shared " + std::string(scalar_name(s.elem)) + " " + s.name + "[" +
                   std::to_string(s.count) + "]\n";
        for (const auto& r : k.regs)
            out += "  .reg " + std::string(scalar_name(r.type)) + " " + r.name + "\n";
        for (const auto& in : k.body) {
            if (in.op == Opcode::Label) out += detail::instr_text(in) + "\n";
            else out += "  " + detail::instr_text(in) + "\n";
        }
        out += "}\n";
    }
    return out;
}

// ---- parsing ----------------------------------------------------------------

namespace detail {

// Per-line token stream: punctuation , ( ) [ ] { } are single tokens,
// everything else splits on whitespace. '#' starts a comment.
struct LineTokens {
    std::vector<std::string> toks;
    std::size_t pos = 0;
    int line_no = 0;

    bool empty() const { return toks.empty(); }
    bool done() const { return pos >= toks.size(); }

    const std::string& peek() const {
        static const std::string kEnd;
        return done() ? kEnd : toks[pos];
    }

    std::string take(std::string_view what) {
        if (done()) throw VptxSyntaxError(line_no, "expected " + std::string(what));
        return toks[pos++];
    }

    void expect(std::string_view tok) {
        if (done() || toks[pos] != tok)
            throw VptxSyntaxError(line_no, "expected '" + std::string(tok) + "', got '" + peek() + "'");
        ++pos;
    }

    bool eat(std::string_view tok) {
        if (!done() && toks[pos] == tok) {
            ++pos;
            return true;
        }
        return false;
    }

    void end(std::string_view context) {
        if (!done())
            throw VptxSyntaxError(line_no, "trailing text '" + peek() + "' after " + std::string(context));
    }
};

class TextParser {
  public:
    explicit TextParser(std::string_view text) { split_lines(text); }

    Module parse() {
        Module m;
        LineTokens* l = next_line();
        if (l == nullptr) throw VptxSyntaxError(1, "empty module text");
        l->expect(".module");
        m.name = take_name(*l, "module name");
        l->end(".module");
        while ((l = next_line()) != nullptr) m.kernels.push_back(parse_kernel(*l));
        return m;
    }

  private:
    void split_lines(std::string_view text) {
        std::size_t pos = 0;
        int line_no = 0;
        while (pos <= text.size()) {
            std::size_t eol = text.find('\n', pos);
            std::string_view raw =
                eol == std::string_view::npos ? text.substr(pos) : text.substr(pos, eol - pos);
            ++line_no;
            LineTokens lt;
            lt.line_no = line_no;
            tokenize(raw, lt);
            if (!lt.toks.empty()) lines_.push_back(std::move(lt));
            if (eol == std::string_view::npos) break;
            pos = eol + 1;
        }
    }

    static void tokenize(std::string_view raw, LineTokens& out) {
        std::size_t i = 0;
        while (i < raw.size()) {
            char c = raw[i];
            if (c == '#') break;
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
                continue;
            }
            if (c == ',' || c == '(' || c == ')' || c == '[' || c == ']' || c == '{' || c == '}') {
                out.toks.emplace_back(1, c);
                ++i;
                continue;
            }
            std::size_t start = i;
            while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i])) && raw[i] != ',' &&
                   raw[i] != '(' && raw[i] != ')' && raw[i] != '[' && raw[i] != ']' && raw[i] != '{' &&
                   raw[i] != '}')
                ++i;
            out.toks.emplace_back(raw.substr(start, i - start));
        }
    }

    LineTokens* next_line() {
        if (line_index_ >= lines_.size()) return nullptr;
        return &lines_[line_index_++];
    }

    Kernel parse_kernel(LineTokens& header) {
        header.expect(".kernel");
        Kernel k;
        k.name = take_name(header, "kernel name");
        header.expect("(");
        if (!header.eat(")")) {
            while (true) {
                header.expect(".param");
                Param p;
                std::string ty = header.take("parameter type");
                if (!parse_param_type(ty, p))
                    throw VptxSyntaxError(header.line_no, "bad parameter type '" + ty + "'");
                p.name = take_name(header, "parameter name");
                k.params.push_back(std::move(p));
                if (header.eat(",")) continue;
                header.expect(")");
                break;
            }
        }
        header.expect("{");
        header.end(".kernel header");

        while (true) {
            LineTokens* l = next_line();
            if (l == nullptr) throw VptxSyntaxError(last_line_no(), "unterminated kernel body");
            if (l->peek() == "}") {
                l->expect("}");
                l->end("kernel");
                break;
            }
            parse_kernel_line(*l, k);
        }
        return k;
    }

    void parse_kernel_line(LineTokens& l, Kernel& k) {
        if (l.peek() == ".shared") {
            l.expect(".shared");
            SharedArray s;
            std::string ty = l.take("element type");
            if (!parse_scalar(ty, s.elem) || s.elem == ScalarType::Pred)
                throw VptxSyntaxError(l.line_no, "bad shared element type '" + ty + "'");
            s.name = take_name(l, "shared array name");
            l.expect("[");
            s.count = take_u32(l, "element count");
            l.expect("]");
            l.end(".shared");
            k.shared.push_back(std::move(s));
            return;
        }
        if (l.peek() == ".reg") {
            l.expect(".reg");
            RegDecl r;
            std::string ty = l.take("register type");
            if (!parse_scalar(ty, r.type)) throw VptxSyntaxError(l.line_no, "bad register type '" + ty + "'");
            r.name = take_reg_name(l, "register name");
            l.end(".reg");
            k.regs.push_back(std::move(r));
            return;
        }
        const std::string& first = l.peek();
        if (!first.empty() && first.back() == ':') {
            Instr in;
            in.op = Opcode::Label;
            in.line = l.line_no;
            in.label = first.substr(0, first.size() - 1);
            if (!is_name(in.label)) throw VptxSyntaxError(l.line_no, "bad label '" + first + "'");
            l.take("label");
            l.end("label");
            k.body.push_back(std::move(in));
            return;
        }
        k.body.push_back(parse_instr(l));
    }

    Instr parse_instr(LineTokens& l) {
        Instr in;
        in.line = l.line_no;
        std::string mnemonic = l.take("instruction");
        std::vector<std::string> dotted = split_dots(mnemonic);
        const std::string& head = dotted[0];

        auto type_at = [&](std::size_t idx, ScalarType& out) {
            if (dotted.size() <= idx || !parse_scalar(dotted[idx], out))
                throw VptxSyntaxError(l.line_no, "missing or bad type suffix on '" + mnemonic + "'");
        };

        static const std::map<std::string, Opcode, std::less<>> unary_ops = {
            {"mov", Opcode::Mov}, {"neg", Opcode::Neg},  {"sqrt", Opcode::Sqrt}, {"sin", Opcode::Sin},
            {"cos", Opcode::Cos}, {"exp", Opcode::Exp},  {"log", Opcode::Log},  {"abs", Opcode::Abs},
        };
        static const std::map<std::string, Opcode, std::less<>> ternary_ops = {
            {"add", Opcode::Add}, {"sub", Opcode::Sub}, {"mul", Opcode::Mul}, {"div", Opcode::Div},
            {"rem", Opcode::Rem}, {"min", Opcode::Min}, {"max", Opcode::Max},
        };

        if (auto it = unary_ops.find(head); it != unary_ops.end()) {
            if (dotted.size() != 2) throw VptxSyntaxError(l.line_no, "bad mnemonic '" + mnemonic + "'");
            type_at(1, in.type);
            in.op = it->second;
            in.ops.push_back(take_operand(l));
            l.expect(",");
            in.ops.push_back(take_operand(l));
            l.end(mnemonic);
            return in;
        }
        if (auto it = ternary_ops.find(head); it != ternary_ops.end()) {
            if (dotted.size() != 2) throw VptxSyntaxError(l.line_no, "bad mnemonic '" + mnemonic + "'");
            type_at(1, in.type);
            in.op = it->second;
            take_list(l, in, 3, mnemonic);
            return in;
        }
        if (head == "fma") {
            if (dotted.size() != 2) throw VptxSyntaxError(l.line_no, "bad mnemonic '" + mnemonic + "'");
            type_at(1, in.type);
            in.op = Opcode::Fma;
            take_list(l, in, 4, mnemonic);
            return in;
        }
        if (head == "and" || head == "or" || head == "xor" || head == "not") {
            if (dotted.size() != 2 || dotted[1] != "pred")
                throw VptxSyntaxError(l.line_no, "'" + head + "' requires .pred");
            in.type = ScalarType::Pred;
            in.op = head == "and" ? Opcode::And : head == "or" ? Opcode::Or : head == "xor" ? Opcode::Xor
                                                                                            : Opcode::Not;
            take_list(l, in, head == "not" ? 2 : 3, mnemonic);
            return in;
        }
        if (head == "setp") {
            if (dotted.size() != 3) throw VptxSyntaxError(l.line_no, "setp needs .cmp.type");
            if (!parse_cmp(dotted[1], in.cmp))
                throw VptxSyntaxError(l.line_no, "bad comparison '" + dotted[1] + "'");
            type_at(2, in.type);
            in.op = Opcode::Setp;
            take_list(l, in, 3, mnemonic);
            return in;
        }
        if (head == "cvt") {
            if (dotted.size() != 3) throw VptxSyntaxError(l.line_no, "cvt needs .dst.src");
            type_at(1, in.type);
            type_at(2, in.type2);
            in.op = Opcode::Cvt;
            take_list(l, in, 2, mnemonic);
            return in;
        }
        if (head == "ld" || head == "st") {
            if (dotted.size() != 3) throw VptxSyntaxError(l.line_no, "'" + head + "' needs .space.type");
            if (!parse_space(dotted[1], in.space))
                throw VptxSyntaxError(l.line_no, "bad space '" + dotted[1] + "'");
            type_at(2, in.type);
            if (head == "ld") {
                in.op = Opcode::Ld;
                in.ops.push_back(take_operand(l));
                l.expect(",");
                l.expect("[");
                in.ops.push_back(take_operand(l));
                l.expect("]");
            } else {
                in.op = Opcode::St;
                l.expect("[");
                in.ops.push_back(take_operand(l));
                l.expect("]");
                l.expect(",");
                in.ops.push_back(take_operand(l));
            }
            l.end(mnemonic);
            return in;
        }
        if (mnemonic == "bra") {
            in.op = Opcode::Bra;
            in.label = take_name(l, "branch target");
            l.end(mnemonic);
            return in;
        }
        if (mnemonic == "bra.p") {
            in.op = Opcode::BraPred;
            in.ops.push_back(take_operand(l));
            l.expect(",");
            in.label = take_name(l, "branch target");
            l.end(mnemonic);
            return in;
        }
        if (mnemonic == "bar.sync") {
            in.op = Opcode::BarSync;
            l.end(mnemonic);
            return in;
        }
        if (mnemonic == "trap") {
            in.op = Opcode::Trap;
            in.trap_code = take_i64(l, "trap code");
            l.end(mnemonic);
            return in;
        }
        if (mnemonic == "ret") {
            in.op = Opcode::Ret;
            l.end(mnemonic);
            return in;
        }
        throw VptxSyntaxError(l.line_no, "unknown instruction '" + mnemonic + "'");
    }

    void take_list(LineTokens& l, Instr& in, int count, const std::string& mnemonic) {
        for (int i = 0; i < count; ++i) {
            if (i) l.expect(",");
            in.ops.push_back(take_operand(l));
        }
        l.end(mnemonic);
    }

    Operand take_operand(LineTokens& l) {
        std::string w = l.take("operand");
        if (w.empty()) throw VptxSyntaxError(l.line_no, "missing operand");
        if (w[0] == '%') {
            if (auto sp = Special::parse(w)) return Operand::special(*sp);
            if (w.size() < 2 || !is_name(w.substr(1)))
                throw VptxSyntaxError(l.line_no, "bad register '" + w + "'");
            return Operand::reg(std::move(w));
        }
        if (w.starts_with("0f") || w.starts_with("0d")) {
            bool f32 = w[1] == 'f';
            std::size_t want = f32 ? 10 : 18;
            if (w.size() != want) throw VptxSyntaxError(l.line_no, "bad float immediate '" + w + "'");
            std::uint64_t bits = 0;
            auto [p, ec] = std::from_chars(w.data() + 2, w.data() + w.size(), bits, 16);
            if (ec != std::errc() || p != w.data() + w.size())
                throw VptxSyntaxError(l.line_no, "bad float immediate '" + w + "'");
            if (f32) return Operand::imm_f32(std::bit_cast<float>(static_cast<std::uint32_t>(bits)));
            return Operand::imm_f64(std::bit_cast<double>(bits));
        }
        if (w[0] == '-' || std::isdigit(static_cast<unsigned char>(w[0]))) {
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v, 10);
            if (ec != std::errc() || p != w.data() + w.size())
                throw VptxSyntaxError(l.line_no, "bad integer immediate '" + w + "'");
            return Operand::imm_int(v);
        }
        if (!is_name(w)) throw VptxSyntaxError(l.line_no, "bad operand '" + w + "'");
        return Operand::symbol(std::move(w));
    }

    static std::vector<std::string> split_dots(const std::string& s) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        while (true) {
            std::size_t dot = s.find('.', start);
            if (dot == std::string::npos) {
                parts.push_back(s.substr(start));
                break;
            }
            parts.push_back(s.substr(start, dot - start));
            start = dot + 1;
        }
        return parts;
    }

    static bool parse_scalar(std::string_view s, ScalarType& out) {
        if (s == "i32") out = ScalarType::I32;
        else if (s == "i64") out = ScalarType::I64;
        else if (s == "f32") out = ScalarType::F32;
        else if (s == "f64") out = ScalarType::F64;
        else if (s == "pred") out = ScalarType::Pred;
        else return false;
        return true;
    }

    static bool parse_cmp(std::string_view s, CmpOp& out) {
        if (s == "eq") out = CmpOp::Eq;
        else if (s == "ne") out = CmpOp::Ne;
        else if (s == "lt") out = CmpOp::Lt;
        else if (s == "le") out = CmpOp::Le;
        else if (s == "gt") out = CmpOp::Gt;
        else if (s == "ge") out = CmpOp::Ge;
        else return false;
        return true;
    }

    static bool parse_space(std::string_view s, Space& out) {
        if (s == "global") out = Space::Global;
        else if (s == "shared") out = Space::Shared;
        else return false;
        return true;
    }

    static bool parse_param_type(const std::string& ty, Param& p) {
        if (ty.starts_with("ptr.global.")) {
            p.kind = ParamKind::Pointer;
            ScalarType t;
            if (!parse_scalar(ty.substr(11), t) || t == ScalarType::Pred) return false;
            p.type = t;
            return true;
        }
        p.kind = ParamKind::Scalar;
        ScalarType t;
        if (!parse_scalar(ty, t) || t == ScalarType::Pred) return false;
        p.type = t;
        return true;
    }

    static bool is_name(std::string_view s) {
        if (s.empty()) return false;
        if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
        for (char c : s)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '$') return false;
        return true;
    }

    std::string take_name(LineTokens& l, std::string_view what) {
        std::string w = l.take(what);
        if (!is_name(w)) throw VptxSyntaxError(l.line_no, "bad " + std::string(what) + " '" + w + "'");
        return w;
    }

    std::string take_reg_name(LineTokens& l, std::string_view what) {
        std::string w = l.take(what);
        if (w.size() < 2 || w[0] != '%' || !is_name(w.substr(1)))
            throw VptxSyntaxError(l.line_no, "bad " + std::string(what) + " '" + w + "'");
        return w;
    }

    std::uint32_t take_u32(LineTokens& l, std::string_view what) {
        std::string w = l.take(what);
        std::uint32_t v = 0;
        auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v, 10);
        if (ec != std::errc() || p != w.data() + w.size())
            throw VptxSyntaxError(l.line_no, "bad " + std::string(what) + " '" + w + "'");
        return v;
    }

    std::int64_t take_i64(LineTokens& l, std::string_view what) {
        std::string w = l.take(what);
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v, 10);
        if (ec != std::errc() || p != w.data() + w.size())
            throw VptxSyntaxError(l.line_no, "bad " + std::string(what) + " '" + w + "'");
        return v;
    }

    int last_line_no() const { return lines_.empty() ? 1 : lines_.back().line_no; }

    std::vector<LineTokens> lines_;
    std::size_t line_index_ = 0;
};

}  // namespace detail

inline Module parse(std::string_view text) {
    detail::TextParser p(text);
    return p.parse();
}

// ---- validation ---------------------------------------------------------------

namespace detail {

class Validator {
  public:
    explicit Validator(const Module& m) : m_(m) {}

    std::vector<Diagnostic> run() {
        std::set<std::string> kernel_names;
        for (const auto& k : m_.kernels) {
            if (!kernel_names.insert(k.name).second) diag(k.name, -1, "duplicate kernel name in module");
            validate_kernel(k);
        }
        return std::move(diags_);
    }

  private:
    struct Symbols {
        std::map<std::string, const Param*> params;
        std::map<std::string, const SharedArray*> shared;
        std::map<std::string, ScalarType> regs;
    };

    void validate_kernel(const Kernel& k) {
        Symbols sym;
        std::set<std::string> names;
        for (const auto& p : k.params) {
            if (!names.insert(p.name).second) diag(k.name, -1, "duplicate parameter '" + p.name + "'");
            sym.params[p.name] = &p;
        }
        for (const auto& s : k.shared) {
            if (!names.insert(s.name).second) diag(k.name, -1, "duplicate shared array '" + s.name + "'");
            if (s.count == 0) diag(k.name, -1, "shared array '" + s.name + "' has zero elements");
            sym.shared[s.name] = &s;
        }
        std::set<std::string> reg_names;
        for (const auto& r : k.regs) {
            if (!reg_names.insert(r.name).second) diag(k.name, -1, "duplicate register '" + r.name + "'");
            sym.regs[r.name] = r.type;
        }

        std::map<std::string, int> labels;
        for (const auto& in : k.body)
            if (in.op == Opcode::Label) ++labels[in.label];
        for (const auto& [label, count] : labels)
            if (count > 1) diag(k.name, -1, "label '" + label + "' defined " + std::to_string(count) + " times");

        for (std::size_t i = 0; i < k.body.size(); ++i) validate_instr(k, sym, labels, i);

        // Fall-through check: the program counter can only leave the body via
        // ret/trap or a final unconditional branch.
        if (k.body.empty() ||
            (k.body.back().op != Opcode::Ret && k.body.back().op != Opcode::Trap &&
             k.body.back().op != Opcode::Bra))
            diag(k.name, static_cast<int>(k.body.size()) - 1, "control falls through the end of the kernel");
    }

    void validate_instr(const Kernel& k, const Symbols& sym, const std::map<std::string, int>& labels,
                        std::size_t index) {
        const Instr& in = k.body[index];
        int idx = static_cast<int>(index);
        auto reg_type = [&](const Operand& o) -> std::optional<ScalarType> {
            auto it = sym.regs.find(o.name);
            if (it == sym.regs.end()) {
                diag(k.name, idx, "undeclared register '" + o.name + "'");
                return std::nullopt;
            }
            return it->second;
        };
        auto want_reg = [&](const Operand& o, ScalarType t, std::string_view role) {
            if (o.kind != Operand::Kind::Reg) {
                diag(k.name, idx, std::string(role) + " must be a register");
                return;
            }
            if (auto rt = reg_type(o); rt && *rt != t)
                diag(k.name, idx,
                     std::string(role) + " '" + o.name + "' has type " + std::string(scalar_name(*rt)) +
                         ", expected " + std::string(scalar_name(t)));
        };

        switch (in.op) {
            case Opcode::Label:
            case Opcode::Ret:
            case Opcode::BarSync:
            case Opcode::Trap:
                return;
            case Opcode::Bra:
                if (!labels.count(in.label)) diag(k.name, idx, "branch to undefined label '" + in.label + "'");
                return;
            case Opcode::BraPred:
                want_reg(in.ops[0], ScalarType::Pred, "branch predicate");
                if (!labels.count(in.label)) diag(k.name, idx, "branch to undefined label '" + in.label + "'");
                return;
            case Opcode::Mov:
                validate_mov(k, sym, idx, in);
                return;
            case Opcode::Add:
            case Opcode::Sub:
            case Opcode::Mul:
            case Opcode::Div:
                if (!is_numeric(in.type)) {
                    diag(k.name, idx, "arithmetic on pred");
                    return;
                }
                for (const auto& o : in.ops) want_reg(o, in.type, "operand");
                return;
            case Opcode::Rem:
                if (!is_int(in.type)) {
                    diag(k.name, idx, "rem requires an integer type");
                    return;
                }
                for (const auto& o : in.ops) want_reg(o, in.type, "operand");
                return;
            case Opcode::Neg:
                if (!is_numeric(in.type)) {
                    diag(k.name, idx, "neg on pred");
                    return;
                }
                for (const auto& o : in.ops) want_reg(o, in.type, "operand");
                return;
            case Opcode::And:
            case Opcode::Or:
            case Opcode::Xor:
            case Opcode::Not:
                for (const auto& o : in.ops) want_reg(o, ScalarType::Pred, "operand");
                return;
            case Opcode::Setp:
                if (!is_numeric(in.type)) {
                    diag(k.name, idx, "setp on pred operands");
                    return;
                }
                want_reg(in.ops[0], ScalarType::Pred, "setp destination");
                want_reg(in.ops[1], in.type, "operand");
                want_reg(in.ops[2], in.type, "operand");
                return;
            case Opcode::Cvt:
                if (!is_numeric(in.type) || !is_numeric(in.type2)) {
                    diag(k.name, idx, "cvt cannot involve pred");
                    return;
                }
                if (in.type == in.type2) {
                    diag(k.name, idx, "cvt between identical types (use mov)");
                    return;
                }
                want_reg(in.ops[0], in.type, "cvt destination");
                want_reg(in.ops[1], in.type2, "cvt source");
                return;
            case Opcode::Ld:
                if (!is_numeric(in.type)) {
                    diag(k.name, idx, "ld of pred");
                    return;
                }
                want_reg(in.ops[0], in.type, "ld destination");
                want_reg(in.ops[1], ScalarType::I64, "address");
                return;
            case Opcode::St:
                if (!is_numeric(in.type)) {
                    diag(k.name, idx, "st of pred");
                    return;
                }
                want_reg(in.ops[0], ScalarType::I64, "address");
                want_reg(in.ops[1], in.type, "st source");
                return;
            case Opcode::Sqrt:
            case Opcode::Sin:
            case Opcode::Cos:
            case Opcode::Exp:
            case Opcode::Log:
                if (!is_float(in.type)) {
                    diag(k.name, idx, "float-only math on non-float type");
                    return;
                }
                for (const auto& o : in.ops) want_reg(o, in.type, "operand");
                return;
            case Opcode::Abs:
            case Opcode::Min:
            case Opcode::Max:
                if (!is_numeric(in.type)) {
                    diag(k.name, idx, "math on pred");
                    return;
                }
                for (const auto& o : in.ops) want_reg(o, in.type, "operand");
                return;
            case Opcode::Fma:
                if (!is_float(in.type)) {
                    diag(k.name, idx, "fma requires a float type");
                    return;
                }
                for (const auto& o : in.ops) want_reg(o, in.type, "operand");
                return;
        }
    }

    void validate_mov(const Kernel& k, const Symbols& sym, int idx, const Instr& in) {
        const Operand& dst = in.ops[0];
        const Operand& src = in.ops[1];
        if (dst.kind != Operand::Kind::Reg) {
            diag(k.name, idx, "mov destination must be a register");
            return;
        }
        auto it = sym.regs.find(dst.name);
        if (it == sym.regs.end()) {
            diag(k.name, idx, "undeclared register '" + dst.name + "'");
        } else if (it->second != in.type) {
            diag(k.name, idx,
                 "mov destination '" + dst.name + "' has type " + std::string(scalar_name(it->second)) +
                     ", expected " + std::string(scalar_name(in.type)));
        }
        switch (src.kind) {
            case Operand::Kind::Reg: {
                auto st = sym.regs.find(src.name);
                if (st == sym.regs.end()) diag(k.name, idx, "undeclared register '" + src.name + "'");
                else if (st->second != in.type)
                    diag(k.name, idx,
                         "mov source '" + src.name + "' has type " + std::string(scalar_name(st->second)) +
                             ", expected " + std::string(scalar_name(in.type)));
                return;
            }
            case Operand::Kind::ImmInt:
                if (!is_int(in.type)) {
                    diag(k.name, idx, "integer immediate on non-integer mov");
                    return;
                }
                if (in.type == ScalarType::I32 &&
                    (src.ival < std::numeric_limits<std::int32_t>::min() ||
                     src.ival > std::numeric_limits<std::int32_t>::max()))
                    diag(k.name, idx, "immediate out of i32 range");
                return;
            case Operand::Kind::ImmFloat:
                if (!is_float(in.type)) {
                    diag(k.name, idx, "float immediate on non-float mov");
                    return;
                }
                if ((in.type == ScalarType::F32) != src.f32_pattern)
                    diag(k.name, idx, "float immediate width does not match mov type");
                return;
            case Operand::Kind::Special:
                if (in.type != ScalarType::I32) diag(k.name, idx, "special registers are i32");
                return;
            case Operand::Kind::Symbol: {
                auto p = sym.params.find(src.name);
                if (p != sym.params.end()) {
                    ScalarType want = p->second->kind == ParamKind::Pointer ? ScalarType::I64 : p->second->type;
                    if (in.type != want)
                        diag(k.name, idx, "parameter '" + src.name + "' reads as " + std::string(scalar_name(want)));
                    return;
                }
                if (sym.shared.count(src.name)) {
                    if (in.type != ScalarType::I64) diag(k.name, idx, "shared base addresses are i64");
                    return;
                }
                diag(k.name, idx, "unknown symbol '" + src.name + "'");
                return;
            }
        }
    }

    void diag(const std::string& kernel, int index, std::string message) {
        diags_.push_back(Diagnostic{kernel, index, std::move(message)});
    }

    const Module& m_;
    std::vector<Diagnostic> diags_;
};

}  // namespace detail

// Empty result iff every kernel/instruction invariant holds. Run-time space
// bounds are the emulator's job; this is purely structural/typing.
inline std::vector<Diagnostic> validate(const Module& m) {
    detail::Validator v(m);
    return v.run();
}

}  // namespace gridjit::vptx
