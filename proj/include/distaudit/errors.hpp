#pragma once

#include <stdexcept>
#include <string>

namespace distaudit {

/// Base class for every error raised by this library.
class error : public std::runtime_error {
public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

class invalid_parameter_error : public error {
public:
  using error::error;
};

/// A Sobol random key failed validation (even init value, bad constant, ...).
class invalid_key_error : public error {
public:
  using error::error;
};

class invalid_input_error : public error {
public:
  using error::error;
};

/// The true set/string difference exceeded the configured bound m-bar,
/// detected either as an unsolvable interpolation or a non-splitting factor.
class reconciliation_bound_error : public error {
public:
  using error::error;
};

class hash_collision_error : public error {
public:
  using error::error;
};

class too_many_cycles_error : public error {
public:
  using error::error;
};

class malformed_multiset_error : public error {
public:
  using error::error;
};

class ambiguous_index_error : public error {
public:
  using error::error;
};

class not_fully_splittable_error : public error {
public:
  using error::error;
};

class invalid_challenge_error : public error {
public:
  using error::error;
};

class lifecycle_error : public error {
public:
  using error::error;
};

class protocol_error : public error {
public:
  using error::error;
};

class singular_fit_error : public error {
public:
  using error::error;
};

class config_error : public error {
public:
  using error::error;
};

}  // namespace distaudit
