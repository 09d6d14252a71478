#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hybridloc
{

// Base of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class CoincidentAnchor : public Error
{
public:
  using Error::Error;
};

class UnknownReference : public Error
{
public:
  using Error::Error;
};

class InvalidGeometry : public Error
{
public:
  using Error::Error;
};

class InvalidMeasurement : public Error
{
public:
  using Error::Error;
};

class EmptyStream : public Error
{
public:
  using Error::Error;
};

class BadWindow : public Error
{
public:
  using Error::Error;
};

class InsufficientHistory : public Error
{
public:
  using Error::Error;
};

class DegenerateSet : public Error
{
public:
  using Error::Error;
};

class MissingGait : public Error
{
public:
  using Error::Error;
};

class SingularFusion : public Error
{
public:
  using Error::Error;
};

class Diverged : public Error
{
public:
  using Error::Error;
};

class NotEnoughMeasurements : public Error
{
public:
  using Error::Error;
};

class DegenerateWaypoints : public Error
{
public:
  using Error::Error;
};

class NoOverlap : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

// Malformed input file; carries the 1-based line that failed.
class SchemaError : public Error
{
public:
  SchemaError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line)
  {
  }

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

private:
  std::string file_;
  std::size_t line_;
};

} // namespace hybridloc
