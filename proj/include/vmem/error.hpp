// Copyright 2026 The Vmem Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VMEM_ERROR_HPP
#define VMEM_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace vmem {

enum class Errc {
  kNoSpace,            // ENOSPACE: not enough free slices
  kFragBig,            // EFRAG_BIG: free bytes suffice, aligned big blocks do not
  kAlign,              // EALIGN: size or address misaligned
  kNoEnt,              // ENOENT: unknown grant, token, pid, address, slot
  kInvalid,            // EINVAL: malformed argument or configuration
  kStateMismatch,      // ESTATE: compare-and-set on a slice failed
  kIllegalTransition,  // ETRANSITION
  kOverlap,            // EOVERLAP: virtual range already occupied
  kViolation,          // EFAULT: access outside any mapping
  kExists,             // EEXIST: duplicate registration or version
  kBusy,               // EBUSY: too many cores loaded, refcnt held
  kIncompatible,       // ELAYOUT: metadata layout mismatch
  kTimeout,            // ETIMEDOUT: grace period expired
  kDisabled,           // EDISABLED: bench backing not enabled
};

/// Stable wire name, e.g. "ENOSPACE". Used by the CLI and trace annotations.
std::string_view errc_name(Errc code);

/// Inverse of errc_name; throws VmemError(kInvalid) on an unknown name.
Errc errc_from_name(std::string_view name);

class VmemError : public std::runtime_error {
 public:
  VmemError(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  Errc code() const noexcept { return code_; }
  /// The message without the "NAME: " prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace vmem

#endif  // VMEM_ERROR_HPP
