#pragma once

#include <stdexcept>
#include <string>

namespace pitdyn {

struct ModelError : std::runtime_error {
    explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

struct WheelLiftOff : ModelError {
    explicit WheelLiftOff(const std::string& msg) : ModelError(msg) {}
};

struct SingularInertia : ModelError {
    explicit SingularInertia(const std::string& msg) : ModelError(msg) {}
};

struct IntegrationDiverged : ModelError {
    explicit IntegrationDiverged(const std::string& msg) : ModelError(msg) {}
};

struct NotClosing : ModelError {
    explicit NotClosing(const std::string& msg) : ModelError(msg) {}
};

struct SingularSystem : ModelError {
    explicit SingularSystem(const std::string& msg) : ModelError(msg) {}
};

struct EmptyCurve : ModelError {
    explicit EmptyCurve(const std::string& msg) : ModelError(msg) {}
};

struct GridMismatch : ModelError {
    explicit GridMismatch(const std::string& msg) : ModelError(msg) {}
};

struct DimMismatch : ModelError {
    explicit DimMismatch(const std::string& msg) : ModelError(msg) {}
};

struct DegenerateCovariance : ModelError {
    explicit DegenerateCovariance(const std::string& msg) : ModelError(msg) {}
};

struct UntrainedWeights : ModelError {
    explicit UntrainedWeights(const std::string& msg) : ModelError(msg) {}
};

struct Diverged : ModelError {
    explicit Diverged(const std::string& msg) : ModelError(msg) {}
};

struct NotPSD : ModelError {
    explicit NotPSD(const std::string& msg) : ModelError(msg) {}
};

struct EmptyTrainingSet : ModelError {
    explicit EmptyTrainingSet(const std::string& msg) : ModelError(msg) {}
};

struct DegenerateFeatures : ModelError {
    explicit DegenerateFeatures(const std::string& msg) : ModelError(msg) {}
};

struct ConfigError : ModelError {
    explicit ConfigError(const std::string& msg) : ModelError(msg) {}
};

} // namespace pitdyn
