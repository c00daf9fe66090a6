#pragma once

#include <stdexcept>
#include <string>

namespace crushpool {

// Bad battery names, bad indices, bad arity. The CLI maps these to exit 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Missing or unusable generator sources, bad pool settings.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed submit files, job outputs and scraped text.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite numeric input.
class ComputationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Pool operations on unknown clusters, nodes or jobs.
class PoolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem trouble while monitoring or stitching.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace crushpool
