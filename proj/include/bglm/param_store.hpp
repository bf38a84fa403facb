#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "bglm/matrix.hpp"

namespace bglm {

struct Param {
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

/// Named parameters, iterated in name order. Entries are node-stable, so
/// layers hold `Param*` handles into the store; moving the store keeps them
/// valid, copying it does not (copies are used as value snapshots only).
class ParamStore {
 public:
  using Map = std::map<std::string, Param>;

  Param& add(const std::string& name, Matrix value, bool trainable = true);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

  void zero_grad();
  std::size_t scalar_count(bool trainable_only = false) const;

  // Overwrites values from a snapshot with the same names and shapes.
  void assign_values(const ParamStore& snapshot);

 private:
  Map entries_;
};

}  // namespace bglm
