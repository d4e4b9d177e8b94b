#include "modelseg/errors.hpp"

namespace modelseg {

ParseError::ParseError(const std::string& message, std::size_t line)
    : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

DegenerateGeometryError::DegenerateGeometryError(const std::string& message,
                                                 std::size_t triangle)
    : Error(message + " (triangle " + std::to_string(triangle) + ")"),
      triangle_(triangle) {}

NumericalInstabilityError::NumericalInstabilityError(const std::string& message,
                                                     int iteration)
    : Error(message + " at iteration " + std::to_string(iteration)),
      iteration_(iteration) {}

StageError::StageError(const std::string& stage, const std::string& message)
    : Error("[" + stage + "] " + message), stage_(stage) {}

}  // namespace modelseg
