#pragma once

// Redcode (ICWS-94 core set, no P-space) warrior programs: parsing,
// canonical serialization and seeded random edits.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dei::redcode {

enum class Opcode : std::uint8_t {
    DAT, MOV, ADD, SUB, MUL, DIV, MOD, JMP, JMZ, JMN, DJN, SEQ, SNE, SLT, SPL, NOP
};
inline constexpr std::size_t kOpcodeCount = 16;

enum class Modifier : std::uint8_t { A, B, AB, BA, F, X, I };
inline constexpr std::size_t kModifierCount = 7;

enum class Mode : std::uint8_t {
    Immediate,  // #
    Direct,     // $
    BIndirect,  // @
    BPredec,    // <
    BPostinc,   // >
    AIndirect,  // *
    APredec,    // {
    APostinc,   // }
};
inline constexpr std::size_t kModeCount = 8;

inline constexpr int kDefaultCoreSize = 8000;
inline constexpr std::size_t kDefaultMaxLength = 100;

std::string_view opcode_name(Opcode op);
std::string_view modifier_name(Modifier m);
char mode_symbol(Mode m);

// ICWS-94 assembler rule for an instruction written without a modifier.
Modifier default_modifier(Opcode op, Mode a_mode, Mode b_mode);

// Field values are always stored normalized into [0, core_size).
struct Instruction {
    Opcode opcode = Opcode::DAT;
    Modifier modifier = Modifier::F;
    Mode a_mode = Mode::Direct;
    Mode b_mode = Mode::Direct;
    std::int32_t a_value = 0;
    std::int32_t b_value = 0;

    bool operator==(const Instruction&) const = default;
};

struct Warrior {
    std::string name;
    std::string author;
    std::vector<Instruction> instructions;
    std::size_t start_offset = 0;
    // Provenance: which operator/node/round produced this program.
    std::string origin;

    std::size_t length() const noexcept { return instructions.size(); }
    bool operator==(const Warrior&) const = default;
};

struct ParseOptions {
    int core_size = kDefaultCoreSize;
    std::size_t max_length = kDefaultMaxLength;
};

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(std::size_t line, std::size_t column, const std::string& message);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string message_;
};

std::int32_t normalize(std::int64_t value, int core_size) noexcept;

// Signed representation of a stored field: values above core_size/2 print
// as negative offsets.
std::int32_t fold(std::int32_t value, int core_size) noexcept;

Warrior parse(std::string_view source, const ParseOptions& options = {});

// Throws SyntaxError (line 0) when `w` breaks the length/start/field invariants.
void validate(const Warrior& w, const ParseOptions& options = {});

std::string to_string(const Instruction& instr, int core_size = kDefaultCoreSize);

// One instruction per line, preceded by optional ;name/;author/;origin
// metadata comments and an ORG line when the start offset is non-zero.
std::string serialize(const Warrior& w, int core_size = kDefaultCoreSize);

// Same instruction list and start offset; ignores name/author/origin.
bool same_program(const Warrior& a, const Warrior& b) noexcept;

// FNV-1a over the program (instructions + start offset). Metadata excluded.
std::uint64_t content_hash(const Warrior& w) noexcept;
std::string content_hash_hex(const Warrior& w);

// --- Offline mutation ------------------------------------------------------

enum class EditKind : std::uint8_t { Point, Insert, Delete, Swap };
inline constexpr std::size_t kEditKindCount = 4;

// Sampling preferences of an offline operator. Distinct tables stand in for
// the distinct inductive biases of different generator models.
struct OperatorBias {
    std::string name = "uniform";
    std::array<double, kOpcodeCount> opcode_weights{};
    std::array<double, kModeCount> mode_weights{};
    std::array<double, kEditKindCount> edit_weights{};
    // Operand values are drawn uniformly from [-value_span, value_span].
    int value_span = 16;
    // Length range for freshly generated programs.
    std::size_t min_length = 1;
    std::size_t max_length = 10;

    static OperatorBias uniform();
    void validate() const;
};

struct Perturbation {
    Warrior warrior;
    EditKind kind = EditKind::Point;
    std::size_t position = 0;
};

Perturbation perturb(const Warrior& w, std::uint64_t seed, const OperatorBias& bias,
                     const ParseOptions& options = {});

// Exactly one edit drawn from `bias`. Pure in (w, seed, bias).
Warrior random_perturb(const Warrior& w, std::uint64_t seed, const OperatorBias& bias,
                       const ParseOptions& options = {});

Instruction random_instruction(std::mt19937_64& rng, const OperatorBias& bias, int core_size);

// Fresh program with length in [bias.min_length, bias.max_length], clamped to
// options.max_length. Starts at offset 0.
Warrior random_warrior(std::uint64_t seed, const OperatorBias& bias,
                       const ParseOptions& options = {});

}  // namespace dei::redcode
