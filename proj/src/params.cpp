#include "cobot/params.hpp"

#include <cstring>
#include <stdexcept>

namespace cobot {

const char* category_name(ParamCategory c) {
    switch (c) {
        case ParamCategory::Frozen: return "frozen";
        case ParamCategory::Decoder: return "decoder";
        case ParamCategory::Peft: return "peft";
        case ParamCategory::Cobot: return "cobot";
    }
    return "?";
}

ParamTensor* ParamStore::add(std::string name, ParamCategory cat, DenseTensor value) {
    if (params_.contains(name))
        throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    auto p = std::make_unique<ParamTensor>();
    p->name = name;
    p->category = cat;
    p->grad = DenseTensor(value.shape());
    p->value = std::move(value);
    ParamTensor* raw = p.get();
    params_.emplace(std::move(name), std::move(p));
    order_.push_back(raw);
    return raw;
}

ParamTensor* ParamStore::find(const std::string& name) {
    auto it = params_.find(name);
    return it == params_.end() ? nullptr : it->second.get();
}

const ParamTensor* ParamStore::find(const std::string& name) const {
    auto it = params_.find(name);
    return it == params_.end() ? nullptr : it->second.get();
}

ParamTensor& ParamStore::at(const std::string& name) {
    if (ParamTensor* p = find(name)) return *p;
    throw std::out_of_range("ParamStore: unknown parameter " + name);
}

const ParamTensor& ParamStore::at(const std::string& name) const {
    if (const ParamTensor* p = find(name)) return *p;
    throw std::out_of_range("ParamStore: unknown parameter " + name);
}

std::vector<ParamTensor*> ParamStore::all() { return order_; }

std::vector<const ParamTensor*> ParamStore::all() const {
    return {order_.begin(), order_.end()};
}

std::int64_t ParamStore::count(ParamCategory cat) const {
    std::int64_t n = 0;
    for (const ParamTensor* p : order_)
        if (p->category == cat) n += p->value.numel();
    return n;
}

std::int64_t ParamStore::count_trainable() const {
    std::int64_t n = 0;
    for (const ParamTensor* p : order_)
        if (p->trainable) n += p->value.numel();
    return n;
}

std::uint64_t ParamStore::checksum(ParamCategory cat) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix_bytes = [&h](const void* data, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const ParamTensor* p : order_) {
        if (p->category != cat) continue;
        mix_bytes(p->name.data(), p->name.size());
        mix_bytes(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.numel()));
    }
    return h;
}

} // namespace cobot
