#pragma once

#include <stdexcept>

namespace pwsmsf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error { public: using Error::Error; };
class DegenerateDenominator : public Error { public: using Error::Error; };
class OffManifold : public Error { public: using Error::Error; };
class WrongClassification : public Error { public: using Error::Error; };
class NoSignChange : public Error { public: using Error::Error; };
class MaxIterations : public Error { public: using Error::Error; };
class NonFiniteValue : public Error { public: using Error::Error; };
class DegenerateEvent : public Error { public: using Error::Error; };
class ChatterDetected : public Error { public: using Error::Error; };
class NoEventFound : public Error { public: using Error::Error; };
class NotConverged : public Error { public: using Error::Error; };
class NotSymmetric : public Error { public: using Error::Error; };
class NotConnected : public Error { public: using Error::Error; };
class SlidingLost : public Error { public: using Error::Error; };
class SizeGuardExceeded : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

}  // namespace pwsmsf
