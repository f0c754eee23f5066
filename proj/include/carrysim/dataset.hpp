#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace carrysim {

enum class Operator { Add, Sub };

std::string to_string(Operator op);
Operator operator_from_string(const std::string& name);

// One unsigned binary operand. Bits are most-significant first.
struct Operand {
    int value = 0;
    std::vector<std::uint8_t> bits;

    Operand() = default;
    Operand(int value, int width);
};

// One arithmetic problem: operands, operator, true answer digits and the
// number of carries (borrows for subtraction) the column algorithm needs.
struct Operation {
    Operator op = Operator::Add;
    Operand a;
    Operand b;
    std::vector<std::uint8_t> input_bits;   // a.bits ++ b.bits, MSB-first
    std::vector<std::uint8_t> target_bits;  // width+1 digits for Add, width for Sub
    int carry_count = 0;
};

Operation make_operation(Operator op, const Operand& a, const Operand& b);

// All operations of one operator requiring exactly `carries` carries.
struct CarryDataset {
    Operator op = Operator::Add;
    int carries = 0;
    std::vector<Operation> operations;

    std::size_t n() const { return operations.size(); }
};

// A shuffled per-participant problem set, `per_class_quota` problems per
// carry class.
struct ProblemSet {
    Operator op = Operator::Add;
    std::vector<Operation> problems;
    int per_class_quota = 0;
};

// Number of columns whose carry-out is 1 when adding a and b column by
// column (full-adder semantics, LSB to MSB).
int count_carries_add(const Operand& a, const Operand& b);

// Number of columns whose borrow-out is 1 when subtracting b from a.
// Throws std::invalid_argument if a.value < b.value.
int count_borrows_sub(const Operand& a, const Operand& b);

// The exhaustive operation dataset: all ordered pairs for Add, all pairs
// with a >= b for Sub. 256 and 136 operations at the default width.
std::vector<Operation> enumerate_dataset(Operator op, int width = 4);

// Splits a full enumeration into carry datasets, one per carry count,
// ordered by carry count ascending. Throws on empty input.
std::vector<CarryDataset> partition_by_carries(const std::vector<Operation>& ops);

// Samples `quota` problems per carry class without replacement; a class
// smaller than the quota is exhausted and padded with uniformly chosen
// duplicates. The combined set is shuffled.
ProblemSet sample_problem_set(const std::vector<CarryDataset>& datasets, int quota,
                              std::uint64_t rng_seed);

std::string bits_to_string(const std::vector<std::uint8_t>& bits);

}  // namespace carrysim
