#include "dei/redcode.hpp"

#include "dei/common.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <map>
#include <sstream>

namespace dei::redcode {

namespace {

constexpr std::array<std::string_view, kOpcodeCount> kOpcodeNames = {
    "DAT", "MOV", "ADD", "SUB", "MUL", "DIV", "MOD", "JMP",
    "JMZ", "JMN", "DJN", "SEQ", "SNE", "SLT", "SPL", "NOP"};

constexpr std::array<std::string_view, kModifierCount> kModifierNames = {
    "A", "B", "AB", "BA", "F", "X", "I"};

constexpr std::array<char, kModeCount> kModeSymbols = {'#', '$', '@', '<', '>', '*', '{', '}'};

std::string upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return out;
}

std::optional<Opcode> lookup_opcode(std::string_view word) {
    const std::string u = upper(word);
    if (u == "CMP") {
        return Opcode::SEQ;
    }
    for (std::size_t i = 0; i < kOpcodeCount; ++i) {
        if (kOpcodeNames[i] == u) {
            return static_cast<Opcode>(i);
        }
    }
    return std::nullopt;
}

std::optional<Modifier> lookup_modifier(std::string_view word) {
    const std::string u = upper(word);
    for (std::size_t i = 0; i < kModifierCount; ++i) {
        if (kModifierNames[i] == u) {
            return static_cast<Modifier>(i);
        }
    }
    return std::nullopt;
}

std::optional<Mode> lookup_mode(char c) {
    for (std::size_t i = 0; i < kModeCount; ++i) {
        if (kModeSymbols[i] == c) {
            return static_cast<Mode>(i);
        }
    }
    return std::nullopt;
}

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string clean_metadata(std::string_view value) {
    std::string out(value);
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return std::string(trim(out));
}

// An operand or ORG expression kept as text until every label is known.
struct PendingExpr {
    std::string text;
    std::size_t line = 0;
    std::size_t column = 0;  // 1-based column of text[0]
};

struct PendingOperand {
    Mode mode = Mode::Direct;
    std::optional<PendingExpr> expr;  // nullopt: omitted, defaults to $0
};

struct PendingInstruction {
    std::size_t line = 0;
    Opcode opcode = Opcode::DAT;
    std::optional<Modifier> modifier;
    PendingOperand a;
    PendingOperand b;
};

// Recursive-descent evaluation of + - * / % ( ) over integers and labels.
class ExprEvaluator {
public:
    ExprEvaluator(const PendingExpr& expr, const std::map<std::string, std::size_t>& labels,
                  std::int64_t origin)
        : expr_(expr), labels_(labels), origin_(origin) {}

    std::int64_t evaluate() {
        const std::int64_t value = parse_sum();
        skip_ws();
        if (pos_ < expr_.text.size()) {
            fail("unexpected '" + std::string(1, expr_.text[pos_]) + "' in expression");
        }
        return value;
    }

private:
    [[noreturn]] void fail(const std::string& message) const {
        throw SyntaxError(expr_.line, expr_.column + pos_, message);
    }

    void skip_ws() {
        while (pos_ < expr_.text.size() && is_space(expr_.text[pos_])) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < expr_.text.size() && expr_.text[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    static std::int64_t checked(long double v, const ExprEvaluator& self) {
        constexpr long double kLimit = 1e15L;
        if (v > kLimit || v < -kLimit) {
            self.fail("expression value out of range");
        }
        return static_cast<std::int64_t>(v);
    }

    std::int64_t parse_sum() {
        std::int64_t value = parse_product();
        for (;;) {
            if (accept('+')) {
                value = checked(static_cast<long double>(value) + parse_product(), *this);
            } else if (accept('-')) {
                value = checked(static_cast<long double>(value) - parse_product(), *this);
            } else {
                return value;
            }
        }
    }

    std::int64_t parse_product() {
        std::int64_t value = parse_unary();
        for (;;) {
            if (accept('*')) {
                value = checked(static_cast<long double>(value) * parse_unary(), *this);
            } else if (accept('/') || accept('%')) {
                const std::size_t op_pos = pos_ - 1;
                const bool is_div = expr_.text[op_pos] == '/';
                const std::int64_t rhs = parse_unary();
                if (rhs == 0) {
                    pos_ = op_pos;
                    fail("division by zero in expression");
                }
                value = is_div ? value / rhs : value % rhs;
            } else {
                return value;
            }
        }
    }

    std::int64_t parse_unary() {
        if (++depth_ > 64) fail("expression nested too deeply");
        std::int64_t value = 0;
        if (accept('-')) {
            value = -parse_unary();
        } else if (accept('+')) {
            value = parse_unary();
        } else {
            value = parse_primary();
        }
        --depth_;
        return value;
    }

    std::int64_t parse_primary() {
        skip_ws();
        if (pos_ >= expr_.text.size()) {
            fail("missing value");
        }
        const char c = expr_.text[pos_];
        if (c == '(') {
            ++pos_;
            const std::int64_t value = parse_sum();
            if (!accept(')')) fail("missing ')'");
            return value;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) != 0) {
            const std::size_t begin = pos_;
            while (pos_ < expr_.text.size() &&
                   std::isdigit(static_cast<unsigned char>(expr_.text[pos_])) != 0) {
                ++pos_;
            }
            if (pos_ - begin > 15) {
                pos_ = begin;
                fail("number too large");
            }
            std::int64_t value = 0;
            std::from_chars(expr_.text.data() + begin, expr_.text.data() + pos_, value);
            if (pos_ < expr_.text.size() && is_ident_char(expr_.text[pos_])) {
                fail("malformed number");
            }
            return value;
        }
        if (is_ident_start(c)) {
            const std::size_t begin = pos_;
            while (pos_ < expr_.text.size() && is_ident_char(expr_.text[pos_])) ++pos_;
            const std::string name = expr_.text.substr(begin, pos_ - begin);
            const auto it = labels_.find(name);
            if (it == labels_.end()) {
                pos_ = begin;
                fail("undefined label '" + name + "'");
            }
            return static_cast<std::int64_t>(it->second) - origin_;
        }
        fail("unexpected '" + std::string(1, c) + "' in expression");
    }

    const PendingExpr& expr_;
    const std::map<std::string, std::size_t>& labels_;
    std::int64_t origin_;
    std::size_t pos_ = 0;
    int depth_ = 0;
};

class Parser {
public:
    Parser(std::string_view source, const ParseOptions& options)
        : source_(source), options_(options) {}

    Warrior run() {
        if (options_.core_size < 2) {
            throw SyntaxError(0, 0, "core size must be at least 2");
        }
        std::size_t line_no = 0;
        std::size_t begin = 0;
        while (begin <= source_.size() && !ended_) {
            std::size_t end = source_.find('\n', begin);
            if (end == std::string_view::npos) end = source_.size();
            ++line_no;
            scan_line(source_.substr(begin, end - begin), line_no);
            begin = end + 1;
        }
        last_line_ = line_no;
        return assemble();
    }

private:
    [[noreturn]] static void fail(std::size_t line, std::size_t column, const std::string& msg) {
        throw SyntaxError(line, column, msg);
    }

    void scan_metadata(std::string_view comment) {
        // comment starts just after ';'
        std::size_t i = 0;
        while (i < comment.size() && is_ident_char(comment[i])) ++i;
        const std::string key = upper(comment.substr(0, i));
        if (i < comment.size() && !is_space(comment[i])) return;
        const std::string value = clean_metadata(comment.substr(i));
        if (key == "NAME") {
            warrior_.name = value;
        } else if (key == "AUTHOR") {
            warrior_.author = value;
        } else if (key == "ORIGIN") {
            warrior_.origin = value;
        }
    }

    void scan_line(std::string_view raw, std::size_t line_no) {
        std::string_view code = raw;
        if (const auto semi = raw.find(';'); semi != std::string_view::npos) {
            if (trim(raw.substr(0, semi)).empty()) {
                scan_metadata(raw.substr(semi + 1));
            }
            code = raw.substr(0, semi);
        }
        std::size_t pos = 0;
        auto skip_ws = [&] {
            while (pos < code.size() && is_space(code[pos])) ++pos;
        };
        auto read_word = [&]() -> std::string_view {
            const std::size_t b = pos;
            if (pos < code.size() && is_ident_start(code[pos])) {
                while (pos < code.size() && is_ident_char(code[pos])) ++pos;
            }
            return code.substr(b, pos - b);
        };

        skip_ws();
        if (pos >= code.size()) return;

        std::size_t word_col = pos + 1;
        std::string_view word = read_word();
        if (word.empty()) {
            fail(line_no, word_col, "expected opcode or label");
        }

        // Leading labels ("loop", "loop:") before the opcode.
        while (!lookup_opcode(word) && !is_directive(word)) {
            if (pos < code.size() && code[pos] == '.') {
                fail(line_no, word_col, "unknown opcode '" + std::string(word) + "'");
            }
            const std::string label(word);
            if (pos < code.size() && code[pos] == ':') ++pos;
            skip_ws();
            if (pos < code.size() && !is_ident_start(code[pos])) {
                fail(line_no, word_col, "unknown opcode '" + label + "'");
            }
            if (labels_.contains(label) ||
                std::find(pending_labels_.begin(), pending_labels_.end(), label) !=
                    pending_labels_.end()) {
                fail(line_no, word_col, "duplicate label '" + label + "'");
            }
            pending_labels_.push_back(label);
            if (pos >= code.size()) return;  // label on its own line
            word_col = pos + 1;
            word = read_word();
        }

        const std::string directive = upper(word);
        if (directive == "EQU" || directive == "FOR" || directive == "ROF" ||
            directive == "PIN") {
            fail(line_no, word_col, "unsupported directive '" + std::string(word) + "'");
        }
        if (directive == "ORG" || directive == "END") {
            skip_ws();
            const std::string_view rest = trim(code.substr(pos));
            if (directive == "ORG" && rest.empty()) {
                fail(line_no, word_col, "ORG requires an expression");
            }
            if (!rest.empty()) {
                org_ = PendingExpr{std::string(rest), line_no, pos + 1};
            }
            if (directive == "END") ended_ = true;
            return;
        }

        PendingInstruction pi;
        pi.line = line_no;
        pi.opcode = *lookup_opcode(word);
        if (pos < code.size() && code[pos] == '.') {
            ++pos;
            const std::size_t mod_col = pos + 1;
            const std::string_view mod = read_word();
            const auto m = lookup_modifier(mod);
            if (!m) {
                fail(line_no, mod_col, "unknown modifier '" + std::string(mod) + "'");
            }
            pi.modifier = *m;
        }
        if (pos < code.size() && !is_space(code[pos])) {
            fail(line_no, pos + 1, "unexpected '" + std::string(1, code[pos]) + "' after opcode");
        }

        // Operands: up to two, comma separated.
        const std::string_view ops = code.substr(pos);
        const std::size_t ops_col = pos + 1;
        const std::size_t comma = ops.find(',');
        if (comma != std::string_view::npos && ops.find(',', comma + 1) != std::string_view::npos) {
            fail(line_no, ops_col + ops.find(',', comma + 1), "too many operands");
        }
        if (!trim(ops).empty()) {
            pi.a = scan_operand(ops.substr(0, comma), line_no, ops_col);
            if (comma != std::string_view::npos) {
                pi.b = scan_operand(ops.substr(comma + 1), line_no, ops_col + comma + 1);
            } else if (pi.opcode == Opcode::DAT) {
                // A lone DAT operand is the B-operand.
                std::swap(pi.a, pi.b);
            }
        } else if (comma != std::string_view::npos) {
            fail(line_no, ops_col, "missing operand");
        }

        for (const auto& label : pending_labels_) {
            labels_[label] = instructions_.size();
        }
        pending_labels_.clear();
        instructions_.push_back(std::move(pi));
        if (instructions_.size() > options_.max_length) {
            fail(line_no, 1,
                 "program exceeds maximum length of " + std::to_string(options_.max_length));
        }
    }

    static bool is_directive(std::string_view word) {
        const std::string u = upper(word);
        return u == "ORG" || u == "END" || u == "EQU" || u == "FOR" || u == "ROF" || u == "PIN";
    }

    static PendingOperand scan_operand(std::string_view text, std::size_t line_no,
                                       std::size_t column) {
        std::size_t i = 0;
        while (i < text.size() && is_space(text[i])) ++i;
        if (i >= text.size()) {
            fail(line_no, column + i, "missing operand");
        }
        PendingOperand op;
        if (const auto m = lookup_mode(text[i])) {
            op.mode = *m;
            ++i;
        } else if (!std::isalnum(static_cast<unsigned char>(text[i])) && text[i] != '_' &&
                   text[i] != '-' && text[i] != '+' && text[i] != '(') {
            fail(line_no, column + i, "unknown addressing mode '" + std::string(1, text[i]) + "'");
        }
        std::string_view expr = text.substr(i);
        std::size_t lead = 0;
        while (lead < expr.size() && is_space(expr[lead])) ++lead;
        expr = trim(expr);
        if (expr.empty()) {
            fail(line_no, column + i, "missing operand value");
        }
        op.expr = PendingExpr{std::string(expr), line_no, column + i + lead};
        return op;
    }

    std::int32_t resolve(const PendingOperand& op, std::size_t index) const {
        if (!op.expr) return 0;
        ExprEvaluator ev(*op.expr, labels_, static_cast<std::int64_t>(index));
        return normalize(ev.evaluate(), options_.core_size);
    }

    Warrior assemble() {
        if (!pending_labels_.empty()) {
            // Trailing labels point one past the end.
            for (const auto& label : pending_labels_) labels_[label] = instructions_.size();
        }
        if (instructions_.empty()) {
            fail(last_line_, 1, "empty program");
        }
        warrior_.instructions.reserve(instructions_.size());
        for (std::size_t idx = 0; idx < instructions_.size(); ++idx) {
            const PendingInstruction& pi = instructions_[idx];
            Instruction in;
            in.opcode = pi.opcode;
            in.a_mode = pi.a.mode;
            in.b_mode = pi.b.mode;
            in.a_value = resolve(pi.a, idx);
            in.b_value = resolve(pi.b, idx);
            in.modifier = pi.modifier.value_or(default_modifier(pi.opcode, in.a_mode, in.b_mode));
            warrior_.instructions.push_back(in);
        }
        if (org_) {
            ExprEvaluator ev(*org_, labels_, 0);
            const std::int64_t start = ev.evaluate();
            if (start < 0 || start >= static_cast<std::int64_t>(instructions_.size())) {
                fail(org_->line, org_->column, "start offset outside the program");
            }
            warrior_.start_offset = static_cast<std::size_t>(start);
        }
        return std::move(warrior_);
    }

    std::string_view source_;
    ParseOptions options_;
    Warrior warrior_;
    std::vector<PendingInstruction> instructions_;
    std::map<std::string, std::size_t> labels_;
    std::vector<std::string> pending_labels_;
    std::optional<PendingExpr> org_;
    bool ended_ = false;
    std::size_t last_line_ = 0;
};

std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

template <std::size_t N>
std::size_t draw_weighted(std::mt19937_64& rng, const std::array<double, N>& weights) {
    std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
    return dist(rng);
}

void draw_operand(std::mt19937_64& rng, const OperatorBias& bias, int core_size, Mode& mode,
                  std::int32_t& value) {
    mode = static_cast<Mode>(draw_weighted(rng, bias.mode_weights));
    const int v = std::uniform_int_distribution<int>(-bias.value_span, bias.value_span)(rng);
    value = normalize(v, core_size);
}

}  // namespace

SyntaxError::SyntaxError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + message),
      line_(line),
      column_(column),
      message_(message) {}

std::string_view opcode_name(Opcode op) { return kOpcodeNames[static_cast<std::size_t>(op)]; }
std::string_view modifier_name(Modifier m) { return kModifierNames[static_cast<std::size_t>(m)]; }
char mode_symbol(Mode m) { return kModeSymbols[static_cast<std::size_t>(m)]; }

Modifier default_modifier(Opcode op, Mode a_mode, Mode b_mode) {
    switch (op) {
        case Opcode::DAT:
        case Opcode::NOP:
            return Modifier::F;
        case Opcode::MOV:
        case Opcode::SEQ:
        case Opcode::SNE:
            if (a_mode == Mode::Immediate) return Modifier::AB;
            if (b_mode == Mode::Immediate) return Modifier::B;
            return Modifier::I;
        case Opcode::ADD:
        case Opcode::SUB:
        case Opcode::MUL:
        case Opcode::DIV:
        case Opcode::MOD:
            if (a_mode == Mode::Immediate) return Modifier::AB;
            if (b_mode == Mode::Immediate) return Modifier::B;
            return Modifier::F;
        case Opcode::SLT:
            if (a_mode == Mode::Immediate) return Modifier::AB;
            return Modifier::B;
        case Opcode::JMP:
        case Opcode::JMZ:
        case Opcode::JMN:
        case Opcode::DJN:
        case Opcode::SPL:
            return Modifier::B;
    }
    return Modifier::F;
}

std::int32_t normalize(std::int64_t value, int core_size) noexcept {
    std::int64_t r = value % core_size;
    if (r < 0) r += core_size;
    return static_cast<std::int32_t>(r);
}

std::int32_t fold(std::int32_t value, int core_size) noexcept {
    return value > core_size / 2 ? value - core_size : value;
}

Warrior parse(std::string_view source, const ParseOptions& options) {
    return Parser(source, options).run();
}

void validate(const Warrior& w, const ParseOptions& options) {
    if (w.instructions.empty()) {
        throw SyntaxError(0, 0, "empty program");
    }
    if (w.instructions.size() > options.max_length) {
        throw SyntaxError(0, 0, "program exceeds maximum length of " +
                                    std::to_string(options.max_length));
    }
    if (w.start_offset >= w.instructions.size()) {
        throw SyntaxError(0, 0, "start offset outside the program");
    }
    for (const Instruction& in : w.instructions) {
        if (in.a_value < 0 || in.a_value >= options.core_size || in.b_value < 0 ||
            in.b_value >= options.core_size) {
            throw SyntaxError(0, 0, "field value not normalized to the core size");
        }
        if (static_cast<std::size_t>(in.opcode) >= kOpcodeCount ||
            static_cast<std::size_t>(in.modifier) >= kModifierCount ||
            static_cast<std::size_t>(in.a_mode) >= kModeCount ||
            static_cast<std::size_t>(in.b_mode) >= kModeCount) {
            throw SyntaxError(0, 0, "invalid instruction encoding");
        }
    }
}

std::string to_string(const Instruction& instr, int core_size) {
    std::string out;
    out.reserve(24);
    out += opcode_name(instr.opcode);
    out += '.';
    out += modifier_name(instr.modifier);
    out += ' ';
    out += mode_symbol(instr.a_mode);
    out += std::to_string(fold(instr.a_value, core_size));
    out += ", ";
    out += mode_symbol(instr.b_mode);
    out += std::to_string(fold(instr.b_value, core_size));
    return out;
}

std::string serialize(const Warrior& w, int core_size) {
    std::string out;
    if (const std::string name = clean_metadata(w.name); !name.empty()) {
        out += ";name " + name + "\n";
    }
    if (const std::string author = clean_metadata(w.author); !author.empty()) {
        out += ";author " + author + "\n";
    }
    if (const std::string origin = clean_metadata(w.origin); !origin.empty()) {
        out += ";origin " + origin + "\n";
    }
    if (w.start_offset != 0) {
        out += "ORG " + std::to_string(w.start_offset) + "\n";
    }
    for (const Instruction& in : w.instructions) {
        out += to_string(in, core_size);
        out += '\n';
    }
    return out;
}

bool same_program(const Warrior& a, const Warrior& b) noexcept {
    return a.start_offset == b.start_offset && a.instructions == b.instructions;
}

std::uint64_t content_hash(const Warrior& w) noexcept {
    std::uint64_t h = fnv1a("dei-warrior");
    auto feed_u32 = [&h](std::uint32_t v) {
        char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
        h = fnv1a(std::string_view(bytes, 4), h);
    };
    feed_u32(static_cast<std::uint32_t>(w.start_offset));
    feed_u32(static_cast<std::uint32_t>(w.instructions.size()));
    for (const Instruction& in : w.instructions) {
        feed_u32(static_cast<std::uint32_t>(in.opcode) | (static_cast<std::uint32_t>(in.modifier) << 8) |
                 (static_cast<std::uint32_t>(in.a_mode) << 16) |
                 (static_cast<std::uint32_t>(in.b_mode) << 24));
        feed_u32(static_cast<std::uint32_t>(in.a_value));
        feed_u32(static_cast<std::uint32_t>(in.b_value));
    }
    return h;
}

std::string content_hash_hex(const Warrior& w) { return to_hex(content_hash(w)); }

OperatorBias OperatorBias::uniform() {
    OperatorBias b;
    b.opcode_weights.fill(1.0);
    b.mode_weights.fill(1.0);
    b.edit_weights.fill(1.0);
    return b;
}

void OperatorBias::validate() const {
    auto check = [](const auto& weights, const char* what) {
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) {
                throw PreconditionError(std::string("negative ") + what + " weight");
            }
            sum += w;
        }
        if (sum <= 0.0) {
            throw PreconditionError(std::string(what) + " weights sum to zero");
        }
    };
    check(opcode_weights, "opcode");
    check(mode_weights, "mode");
    check(edit_weights, "edit");
    if (value_span < 0) throw PreconditionError("value_span must be non-negative");
    if (min_length < 1 || min_length > max_length) {
        throw PreconditionError("bias length range must satisfy 1 <= min <= max");
    }
}

Instruction random_instruction(std::mt19937_64& rng, const OperatorBias& bias, int core_size) {
    Instruction in;
    in.opcode = static_cast<Opcode>(draw_weighted(rng, bias.opcode_weights));
    draw_operand(rng, bias, core_size, in.a_mode, in.a_value);
    draw_operand(rng, bias, core_size, in.b_mode, in.b_value);
    in.modifier = default_modifier(in.opcode, in.a_mode, in.b_mode);
    return in;
}

Perturbation perturb(const Warrior& w, std::uint64_t seed, const OperatorBias& bias,
                     const ParseOptions& options) {
    bias.validate();
    validate(w, options);
    std::mt19937_64 rng(seed);

    const std::size_t len = w.instructions.size();
    std::array<double, kEditKindCount> feasible = bias.edit_weights;
    if (len >= options.max_length) feasible[static_cast<std::size_t>(EditKind::Insert)] = 0.0;
    if (len <= 1) {
        feasible[static_cast<std::size_t>(EditKind::Delete)] = 0.0;
        feasible[static_cast<std::size_t>(EditKind::Swap)] = 0.0;
    }
    double total = 0.0;
    for (double f : feasible) total += f;

    Perturbation out{w, EditKind::Point, 0};
    out.kind = total > 0.0 ? static_cast<EditKind>(draw_weighted(rng, feasible)) : EditKind::Point;
    auto& ins = out.warrior.instructions;

    switch (out.kind) {
        case EditKind::Point: {
            out.position = draw_index(rng, len);
            Instruction& in = ins[out.position];
            in.opcode = static_cast<Opcode>(draw_weighted(rng, bias.opcode_weights));
            if (std::bernoulli_distribution(0.5)(rng)) {
                draw_operand(rng, bias, options.core_size, in.a_mode, in.a_value);
            }
            if (std::bernoulli_distribution(0.5)(rng)) {
                draw_operand(rng, bias, options.core_size, in.b_mode, in.b_value);
            }
            in.modifier = default_modifier(in.opcode, in.a_mode, in.b_mode);
            break;
        }
        case EditKind::Insert: {
            out.position = draw_index(rng, len + 1);
            ins.insert(ins.begin() + static_cast<std::ptrdiff_t>(out.position),
                       random_instruction(rng, bias, options.core_size));
            if (out.position <= out.warrior.start_offset && out.position < len) {
                ++out.warrior.start_offset;
            }
            break;
        }
        case EditKind::Delete: {
            out.position = draw_index(rng, len);
            ins.erase(ins.begin() + static_cast<std::ptrdiff_t>(out.position));
            std::size_t& start = out.warrior.start_offset;
            if (out.position < start) --start;
            if (start >= ins.size()) start = ins.size() - 1;
            break;
        }
        case EditKind::Swap: {
            const std::size_t i = draw_index(rng, len);
            std::size_t j = draw_index(rng, len - 1);
            if (j >= i) ++j;
            std::swap(ins[i], ins[j]);
            out.position = std::min(i, j);
            break;
        }
    }
    return out;
}

Warrior random_perturb(const Warrior& w, std::uint64_t seed, const OperatorBias& bias,
                       const ParseOptions& options) {
    return perturb(w, seed, bias, options).warrior;
}

Warrior random_warrior(std::uint64_t seed, const OperatorBias& bias, const ParseOptions& options) {
    bias.validate();
    std::mt19937_64 rng(seed);
    const std::size_t hi = std::min(bias.max_length, options.max_length);
    const std::size_t lo = std::min(bias.min_length, hi);
    const std::size_t len = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    Warrior w;
    w.instructions.reserve(len);
    for (std::size_t i = 0; i < len; ++i) {
        w.instructions.push_back(random_instruction(rng, bias, options.core_size));
    }
    return w;
}

}  // namespace dei::redcode
