#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "favalon/types.hpp"

namespace favalon {

enum class Fixity { Prefix, Infix };
enum class Assoc { Ltr, Rtl };

struct BoundAttributes {
  Fixity fixity = Fixity::Prefix;
  Assoc assoc = Assoc::Ltr;
  bool operator==(const BoundAttributes&) const = default;
};

inline constexpr BoundAttributes kDefaultAttrs{};
inline constexpr BoundAttributes kInfixLtr{Fixity::Infix, Assoc::Ltr};
inline constexpr BoundAttributes kInfixRtl{Fixity::Infix, Assoc::Rtl};

/// One overload entry: the bound expression, its attributes, and the
/// placeholder ids quantified at bind time (its type scheme).
struct Binding {
  ExprPtr value;
  BoundAttributes attrs;
  std::vector<int> quantified;
};

using OverloadList = std::vector<Binding>;

/// Stream conversion participating in command wrapping and adapt_stream.
struct Conversion {
  std::string name;
  ExprPtr from;
  ExprPtr to;
  int priority = 0;  // lower = preferred
  std::function<HostValue(EvalContext&, const HostValue&)> impl;
};

using ConversionTable = std::vector<Conversion>;

/// Lexically scoped map from identifier to an ordered overload list.
/// Persistent: bind/push return updated values, older copies keep observing
/// their own state.
class TypeEnvironment {
  struct Frame {
    std::shared_ptr<const Frame> parent;
    std::map<std::string, OverloadList> entries;
  };

 public:
  TypeEnvironment() : head_(std::make_shared<Frame>()) {}

  /// Appends an overload for `name` in the innermost frame.
  void bind(const std::string& name, BoundAttributes attrs, ExprPtr value,
            std::vector<int> quantified = {}) {
    auto frame = std::make_shared<Frame>(*head_);
    frame->entries[name].push_back({std::move(value), attrs, std::move(quantified)});
    head_ = std::move(frame);
  }

  /// Replaces every overload for `name` in the innermost frame.
  void rebind(const std::string& name, BoundAttributes attrs, ExprPtr value,
              std::vector<int> quantified = {}) {
    auto frame = std::make_shared<Frame>(*head_);
    frame->entries[name] = {{std::move(value), attrs, std::move(quantified)}};
    head_ = std::move(frame);
  }

  /// Innermost overload list for `name`; null = NotFound.
  const OverloadList* lookup(const std::string& name) const {
    for (const Frame* f = head_.get(); f; f = f->parent.get()) {
      auto it = f->entries.find(name);
      if (it != f->entries.end()) return &it->second;
    }
    return nullptr;
  }

  /// Attributes of a name: first entry of the innermost overload list.
  std::optional<BoundAttributes> attributes(const std::string& name) const {
    const auto* list = lookup(name);
    if (!list || list->empty()) return std::nullopt;
    return list->front().attrs;
  }

  TypeEnvironment push_scope() const {
    TypeEnvironment inner = *this;
    auto frame = std::make_shared<Frame>();
    frame->parent = head_;
    inner.head_ = std::move(frame);
    return inner;
  }

  /// All bound names with the given prefix, innermost-first, deduplicated.
  std::vector<std::string> complete(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const Frame* f = head_.get(); f; f = f->parent.get()) {
      for (const auto& [name, list] : f->entries) {
        if (name.rfind(prefix, 0) != 0) continue;
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // conversions ride along with the environment so registration is part of
  // the same persistent state
  void register_conversion(Conversion c,
                           const std::function<void(const std::string&)>& warn = {}) {
    auto table = conversions_ ? std::make_shared<ConversionTable>(*conversions_)
                              : std::make_shared<ConversionTable>();
    for (auto& existing : *table) {
      if (equal(existing.from, c.from) && equal(existing.to, c.to)) {
        if (warn)
          warn("conversion " + existing.name + " replaced by " + c.name + " for " +
               display_type(c.from) + " -> " + display_type(c.to));
        existing = std::move(c);
        std::sort(table->begin(), table->end(),
                  [](const Conversion& a, const Conversion& b) { return a.priority < b.priority; });
        conversions_ = std::move(table);
        return;
      }
    }
    table->push_back(std::move(c));
    std::sort(table->begin(), table->end(),
              [](const Conversion& a, const Conversion& b) { return a.priority < b.priority; });
    conversions_ = std::move(table);
  }

  const ConversionTable& conversions() const {
    static const ConversionTable empty;
    return conversions_ ? *conversions_ : empty;
  }

  /// Session-monotonic placeholder ids.
  int fresh_placeholder_id() { return next_placeholder_++; }
  ExprPtr fresh_placeholder() { return placeholder(fresh_placeholder_id()); }

  Substitution& subst() { return subst_; }
  const Substitution& subst() const { return subst_; }

 private:
  std::shared_ptr<const Frame> head_;
  std::shared_ptr<const ConversionTable> conversions_;
  Substitution subst_;
  int next_placeholder_ = 1;
};

// free-function forms of the environment operations

inline TypeEnvironment bind(TypeEnvironment env, const std::string& name, BoundAttributes attrs,
                            ExprPtr value, std::vector<int> quantified = {}) {
  env.bind(name, attrs, std::move(value), std::move(quantified));
  return env;
}

inline const OverloadList* lookup(const TypeEnvironment& env, const std::string& name) {
  return env.lookup(name);
}

}  // namespace favalon
