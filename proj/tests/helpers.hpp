#pragma once

#include "trail/mdp.hpp"

#include <filesystem>
#include <string>

namespace trail::testing {

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("trail_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Two-state chain: action 0 stays, action 1 moves to state 1; state 1 absorbs.
inline TabularMdp two_state_chain(double gamma = 0.9) {
  Matrix t(4, 2);
  t << 1, 0,  //
      0, 1,   //
      0, 1,   //
      0, 1;
  Vector mu(2);
  mu << 1, 0;
  return TabularMdp(2, 2, t, mu, gamma);
}

}  // namespace trail::testing
