#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cobot/tensor.hpp"

namespace cobot {

enum class ParamCategory { Frozen, Decoder, Peft, Cobot };

const char* category_name(ParamCategory c);

struct ParamTensor {
    std::string name;
    ParamCategory category = ParamCategory::Frozen;
    bool trainable = false;
    DenseTensor value;
    DenseTensor grad; // same shape, zeroed by the optimizer step
};

// Owning registry of named parameters. Pointers returned by add()/find()
// remain valid for the life of the store.
class ParamStore {
public:
    ParamTensor* add(std::string name, ParamCategory cat, DenseTensor value);
    ParamTensor* find(const std::string& name);
    const ParamTensor* find(const std::string& name) const;
    ParamTensor& at(const std::string& name);
    const ParamTensor& at(const std::string& name) const;

    std::vector<ParamTensor*> all();
    std::vector<const ParamTensor*> all() const;
    std::size_t size() const { return order_.size(); }

    std::int64_t count(ParamCategory cat) const;
    std::int64_t count_trainable() const;

    // FNV-1a over the value bytes of every parameter in a category, in
    // insertion order; detects any mutation of frozen blobs.
    std::uint64_t checksum(ParamCategory cat) const;

private:
    std::map<std::string, std::unique_ptr<ParamTensor>> params_;
    std::vector<ParamTensor*> order_;
};

} // namespace cobot
