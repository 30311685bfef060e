#include "doctest.h"

#include "dei/common.hpp"
#include "dei/redcode.hpp"
#include "warrior_gen.hpp"

#include <filesystem>

using namespace dei::redcode;

namespace {

Instruction instr(Opcode op, Modifier m, Mode am, std::int32_t a, Mode bm, std::int32_t b) {
    return Instruction{op, m, am, bm, a, b};
}

std::vector<std::filesystem::path> bundled_warriors() {
    std::vector<std::filesystem::path> out;
    for (const auto& entry :
         std::filesystem::recursive_directory_iterator(dei::data_dir() / "warriors")) {
        if (entry.path().extension() == ".red") out.push_back(entry.path());
    }
    return out;
}

}  // namespace

TEST_CASE("parse: classic Imp gets the default .I modifier") {
    const Warrior w = parse("MOV 0, 1");
    REQUIRE(w.length() == 1);
    CHECK(w.instructions[0] == instr(Opcode::MOV, Modifier::I, Mode::Direct, 0, Mode::Direct, 1));
    CHECK(w.start_offset == 0);
}

TEST_CASE("parse: DAT defaults to .F") {
    const Warrior w = parse("DAT #0, #0");
    CHECK(w.instructions[0] ==
          instr(Opcode::DAT, Modifier::F, Mode::Immediate, 0, Mode::Immediate, 0));
}

TEST_CASE("parse: negative offsets are normalized modulo the core size") {
    const Warrior w = parse("JMP -2");
    CHECK(w.instructions[0] == instr(Opcode::JMP, Modifier::B, Mode::Direct, 7998, Mode::Direct, 0));

    const Warrior small = parse("JMP -2", ParseOptions{.core_size = 10, .max_length = 5});
    CHECK(small.instructions[0].a_value == 8);
}

TEST_CASE("default modifier table") {
    using M = Mode;
    CHECK(default_modifier(Opcode::MOV, M::Immediate, M::Direct) == Modifier::AB);
    CHECK(default_modifier(Opcode::MOV, M::Direct, M::Immediate) == Modifier::B);
    CHECK(default_modifier(Opcode::MOV, M::BIndirect, M::APredec) == Modifier::I);
    CHECK(default_modifier(Opcode::SEQ, M::Direct, M::Direct) == Modifier::I);
    CHECK(default_modifier(Opcode::ADD, M::Immediate, M::Direct) == Modifier::AB);
    CHECK(default_modifier(Opcode::SUB, M::Direct, M::Immediate) == Modifier::B);
    CHECK(default_modifier(Opcode::MUL, M::Direct, M::Direct) == Modifier::F);
    CHECK(default_modifier(Opcode::SLT, M::Immediate, M::Direct) == Modifier::AB);
    CHECK(default_modifier(Opcode::SLT, M::Direct, M::Immediate) == Modifier::B);
    CHECK(default_modifier(Opcode::SPL, M::Immediate, M::Immediate) == Modifier::B);
    CHECK(default_modifier(Opcode::DJN, M::Direct, M::Direct) == Modifier::B);
    CHECK(default_modifier(Opcode::NOP, M::Direct, M::Direct) == Modifier::F);
}

TEST_CASE("parse: labels, expressions, ORG and comments") {
    const Warrior w = parse(R"(
;redcode-94
;name  Labelled
;author Someone
        ORG   start
bomb    DAT   #0, #0        ; the bomb
start:  ADD   #4*2-1, bomb
        MOV   bomb, @bomb
        JMP   start
        DAT   #(3+4)%5, 0
)");
    CHECK(w.name == "Labelled");
    CHECK(w.author == "Someone");
    REQUIRE(w.length() == 5);
    CHECK(w.start_offset == 1);
    CHECK(w.instructions[1] == instr(Opcode::ADD, Modifier::AB, Mode::Immediate, 7, Mode::Direct, 7999));
    CHECK(w.instructions[2] == instr(Opcode::MOV, Modifier::I, Mode::Direct, 7998, Mode::BIndirect, 7998));
    CHECK(w.instructions[3].a_value == 7998);
    CHECK(w.instructions[4].a_value == 2);
}

TEST_CASE("parse: single-operand DAT puts the operand in B") {
    const Warrior w = parse("DAT #833");
    CHECK(w.instructions[0] == instr(Opcode::DAT, Modifier::F, Mode::Direct, 0, Mode::Immediate, 833));
}

TEST_CASE("parse: END stops assembly and may set the start") {
    const Warrior w = parse("DAT 0, 0\nhere MOV 0, 1\nEND here\nthis is ignored");
    CHECK(w.length() == 2);
    CHECK(w.start_offset == 1);
}

TEST_CASE("parse: CMP is accepted as SEQ") {
    CHECK(parse("CMP 1, 2").instructions[0].opcode == Opcode::SEQ);
}

TEST_CASE("parse errors carry line and column") {
    auto expect_error = [](std::string_view src, std::size_t line, std::size_t col) {
        try {
            (void)parse(src);
            FAIL("expected SyntaxError for: " << src);
        } catch (const SyntaxError& e) {
            CHECK(e.line() == line);
            CHECK(e.column() == col);
        }
    };
    expect_error("FOO 1, 2", 1, 1);
    expect_error("MOV 0, 1\n  XYZ.F 1, 2", 2, 3);
    expect_error("MOV !0, 1", 1, 5);
    expect_error("MOV.Q 0, 1", 1, 5);
    expect_error("MOV 0, 1, 2", 1, 9);
    expect_error("MOV 0,", 1, 7);
    expect_error("MOV 0, 1x", 1, 9);
    expect_error("JMP nowhere", 1, 5);
    expect_error("; only a comment\n", 2, 1);
    expect_error("x EQU 5\nMOV x, 1", 1, 3);
    expect_error("FOR 3\nROF", 1, 1);
    expect_error("DIV #1, #(2/0)", 1, 12);
    expect_error("ORG 5\nMOV 0, 1", 1, 5);
    expect_error("a MOV 0, 1\na DAT 0, 0", 2, 1);
}

TEST_CASE("parse rejects programs longer than the configured maximum") {
    std::string src;
    for (int i = 0; i < 4; ++i) src += "MOV 0, 1\n";
    CHECK_NOTHROW(parse(src, ParseOptions{.core_size = 8000, .max_length = 4}));
    src += "DAT 0, 0\n";
    CHECK_THROWS_AS(parse(src, ParseOptions{.core_size = 8000, .max_length = 4}), SyntaxError);
}

TEST_CASE("serialize: canonical form") {
    CHECK(serialize(parse("MOV 0, 1")) == "MOV.I $0, $1\n");
    const Warrior jmp = parse("JMP -2");
    CHECK(serialize(jmp) == "JMP.B $-2, $0\n");
    Warrior w = parse("ORG 1\nDAT #1, #2\nSPL 0, <-3");
    w.name = "A\nB";
    CHECK(serialize(w) == ";name A B\nORG 1\nDAT.F #1, #2\nSPL.B $0, <-3\n");
}

TEST_CASE("round trip on every bundled warrior") {
    const auto files = bundled_warriors();
    REQUIRE(files.size() >= 8);
    for (const auto& path : files) {
        CAPTURE(path.string());
        const Warrior w = parse(dei::read_file(path));
        const std::string once = serialize(w);
        const Warrior again = parse(once);
        CHECK(again == w);
        CHECK(serialize(again) == once);
    }
}

TEST_CASE("round trip on fuzz-generated warriors") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        const Warrior w = dei::testing::arbitrary_warrior(rng);
        const Warrior back = parse(serialize(w));
        REQUIRE(back == w);
        for (const Instruction& in : back.instructions) {
            CHECK(in.a_value >= 0);
            CHECK(in.a_value < 8000);
            CHECK(in.b_value >= 0);
            CHECK(in.b_value < 8000);
        }
    }
}

TEST_CASE("mangled text never crashes the parser") {
    const std::string base = dei::read_file(dei::data_dir() / "warriors/seeds/mice.red");
    std::mt19937_64 rng(99);
    for (int i = 0; i < 2000; ++i) {
        const std::string text = dei::testing::mangle(base, rng);
        try {
            const Warrior w = parse(text);
            validate(w);
        } catch (const SyntaxError&) {
        }
    }
}

TEST_CASE("content hash ignores metadata but not the program") {
    Warrior a = parse("MOV 0, 1");
    Warrior b = a;
    b.name = "other";
    b.origin = "somewhere";
    CHECK(content_hash(a) == content_hash(b));
    b.instructions[0].b_value = 2;
    CHECK(content_hash(a) != content_hash(b));
    Warrior c = parse("DAT 0, 0\nMOV 0, 1");
    Warrior d = c;
    d.start_offset = 1;
    CHECK(content_hash(c) != content_hash(d));
}

TEST_CASE("random_perturb: delete-only bias cannot empty the Imp") {
    OperatorBias bias = OperatorBias::uniform();
    bias.edit_weights = {0.0, 0.0, 1.0, 0.0};
    const Warrior imp = parse("MOV 0, 1");
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Perturbation p = perturb(imp, seed, bias);
        CHECK(p.kind == EditKind::Point);
        CHECK(p.warrior.length() == 1);
    }
}

TEST_CASE("random_perturb is deterministic and stays valid") {
    const OperatorBias bias = OperatorBias::uniform();
    const Warrior dwarf = parse(dei::read_file(dei::data_dir() / "warriors/seeds/dwarf.red"));
    CHECK(random_perturb(dwarf, 42, bias) == random_perturb(dwarf, 42, bias));

    std::mt19937_64 rng(3);
    ParseOptions small{.core_size = 8000, .max_length = 6};
    for (int i = 0; i < 2000; ++i) {
        Warrior w = dei::testing::arbitrary_warrior(rng, 8000, 6);
        const Perturbation p = perturb(w, rng(), bias, small);
        CHECK_NOTHROW(validate(p.warrior, small));
        const auto before = static_cast<long>(w.length());
        const auto after = static_cast<long>(p.warrior.length());
        switch (p.kind) {
            case EditKind::Insert: CHECK(after == before + 1); break;
            case EditKind::Delete: CHECK(after == before - 1); break;
            default: CHECK(after == before); break;
        }
    }
}

TEST_CASE("random_perturb follows the opcode bias") {
    OperatorBias bias = OperatorBias::uniform();
    bias.opcode_weights.fill(0.1 / 15.0);
    bias.opcode_weights[static_cast<std::size_t>(Opcode::SPL)] = 0.9;
    bias.edit_weights = {1.0, 0.0, 0.0, 0.0};
    const Warrior dwarf = parse(dei::read_file(dei::data_dir() / "warriors/seeds/dwarf.red"));
    int spl = 0;
    constexpr int kDraws = 10000;
    for (int i = 0; i < kDraws; ++i) {
        const Perturbation p = perturb(dwarf, static_cast<std::uint64_t>(i), bias);
        REQUIRE(p.kind == EditKind::Point);
        if (p.warrior.instructions[p.position].opcode == Opcode::SPL) ++spl;
    }
    CHECK(static_cast<double>(spl) / kDraws >= 0.85);
}

TEST_CASE("random_warrior respects the bias length range") {
    OperatorBias bias = OperatorBias::uniform();
    bias.min_length = 3;
    bias.max_length = 7;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const Warrior w = random_warrior(s, bias);
        CHECK(w.length() >= 3);
        CHECK(w.length() <= 7);
        CHECK(w == random_warrior(s, bias));
    }
}
