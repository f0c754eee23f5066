#include "carrysim/dataset.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "carrysim/rng.hpp"

namespace carrysim {

std::string to_string(Operator op) {
    return op == Operator::Add ? "add" : "sub";
}

Operator operator_from_string(const std::string& name) {
    if (name == "add") return Operator::Add;
    if (name == "sub") return Operator::Sub;
    throw std::invalid_argument("unknown operator: " + name);
}

Operand::Operand(int v, int width) : value(v), bits(static_cast<std::size_t>(width)) {
    if (width <= 0) throw std::invalid_argument("operand width must be positive");
    if (v < 0 || v >= (1 << width)) throw std::invalid_argument("operand value out of range");
    for (int i = 0; i < width; ++i) {
        bits[static_cast<std::size_t>(width - 1 - i)] = static_cast<std::uint8_t>((v >> i) & 1);
    }
}

int count_carries_add(const Operand& a, const Operand& b) {
    const std::size_t width = a.bits.size();
    if (b.bits.size() != width) throw std::invalid_argument("operand widths differ");
    int carries = 0;
    int carry_in = 0;
    for (std::size_t i = 0; i < width; ++i) {
        // column i counted from the least significant end
        const int ai = a.bits[width - 1 - i];
        const int bi = b.bits[width - 1 - i];
        const int column_sum = ai + bi + carry_in;
        carry_in = column_sum >= 2 ? 1 : 0;
        carries += carry_in;
    }
    return carries;
}

int count_borrows_sub(const Operand& a, const Operand& b) {
    const std::size_t width = a.bits.size();
    if (b.bits.size() != width) throw std::invalid_argument("operand widths differ");
    if (a.value < b.value) throw std::invalid_argument("subtraction would be negative");
    int borrows = 0;
    int borrow_in = 0;
    for (std::size_t i = 0; i < width; ++i) {
        const int ai = a.bits[width - 1 - i];
        const int bi = b.bits[width - 1 - i];
        borrow_in = (ai - bi - borrow_in < 0) ? 1 : 0;
        borrows += borrow_in;
    }
    return borrows;
}

Operation make_operation(Operator op, const Operand& a, const Operand& b) {
    Operation result;
    result.op = op;
    result.a = a;
    result.b = b;
    result.input_bits = a.bits;
    result.input_bits.insert(result.input_bits.end(), b.bits.begin(), b.bits.end());

    const int width = static_cast<int>(a.bits.size());
    if (op == Operator::Add) {
        const Operand answer(a.value + b.value, width + 1);
        result.target_bits = answer.bits;
        result.carry_count = count_carries_add(a, b);
    } else {
        const Operand answer(a.value - b.value, width);  // throws via count if a < b
        result.carry_count = count_borrows_sub(a, b);
        result.target_bits = answer.bits;
    }
    return result;
}

std::vector<Operation> enumerate_dataset(Operator op, int width) {
    if (width <= 0 || width > 16) throw std::invalid_argument("unsupported operand width");
    const int limit = 1 << width;
    std::vector<Operation> ops;
    for (int a = 0; a < limit; ++a) {
        for (int b = 0; b < limit; ++b) {
            if (op == Operator::Sub && a < b) continue;
            ops.push_back(make_operation(op, Operand(a, width), Operand(b, width)));
        }
    }
    return ops;
}

std::vector<CarryDataset> partition_by_carries(const std::vector<Operation>& ops) {
    if (ops.empty()) throw std::invalid_argument("cannot partition an empty dataset");
    std::map<int, CarryDataset> classes;
    for (const Operation& operation : ops) {
        CarryDataset& cls = classes[operation.carry_count];
        cls.op = operation.op;
        cls.carries = operation.carry_count;
        cls.operations.push_back(operation);
    }
    std::vector<CarryDataset> result;
    result.reserve(classes.size());
    for (auto& [carries, cls] : classes) result.push_back(std::move(cls));
    return result;
}

ProblemSet sample_problem_set(const std::vector<CarryDataset>& datasets, int quota,
                              std::uint64_t rng_seed) {
    if (quota < 1) throw std::invalid_argument("quota must be at least 1");
    if (datasets.empty()) throw std::invalid_argument("no carry datasets to sample from");

    Rng rng(rng_seed);
    ProblemSet set;
    set.op = datasets.front().op;
    set.per_class_quota = quota;

    for (const CarryDataset& cls : datasets) {
        std::vector<std::size_t> order(cls.operations.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        const std::size_t unique_take = std::min<std::size_t>(order.size(), static_cast<std::size_t>(quota));
        for (std::size_t i = 0; i < unique_take; ++i) {
            set.problems.push_back(cls.operations[order[i]]);
        }
        // Pad a class smaller than the quota with uniformly chosen duplicates.
        for (std::size_t i = unique_take; i < static_cast<std::size_t>(quota); ++i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform_int(cls.operations.size()));
            set.problems.push_back(cls.operations[j]);
        }
    }
    rng.shuffle(set.problems);
    return set;
}

std::string bits_to_string(const std::vector<std::uint8_t>& bits) {
    std::string s;
    s.reserve(bits.size());
    for (std::uint8_t bit : bits) s.push_back(bit ? '1' : '0');
    return s;
}

}  // namespace carrysim
