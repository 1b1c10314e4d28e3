#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "tpad/autodiff.hpp"

namespace tpad {

// Ordered, named collection of trainable leaves. Creation order is the
// deterministic-initialization order and the optimizer order.
class ParamStore {
public:
    ad::Var add(const std::string& name, Mat init) {
        ad::Var v = ad::leaf(std::move(init), true);
        items_.emplace_back(name, v);
        return v;
    }

    const std::vector<std::pair<std::string, ad::Var>>& items() const { return items_; }

    std::vector<ad::Var> vars() const {
        std::vector<ad::Var> out;
        out.reserve(items_.size());
        for (const auto& [name, v] : items_) out.push_back(v);
        return out;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(items_.size());
        for (const auto& [name, v] : items_) out.push_back(name);
        return out;
    }

    const ad::Var* find(const std::string& name) const {
        for (const auto& [n, v] : items_)
            if (n == name) return &v;
        return nullptr;
    }

    int64_t total_size() const {
        int64_t s = 0;
        for (const auto& [n, v] : items_) s += v.val().size();
        return s;
    }

    // Binary blob format: count, then per item name / rows / cols / payload.
    void save(std::ostream& os) const;
    void load(std::istream& is); // values copied into existing leaves by name

private:
    std::vector<std::pair<std::string, ad::Var>> items_;
};

} // namespace tpad
