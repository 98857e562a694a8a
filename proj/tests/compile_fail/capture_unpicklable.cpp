// Must NOT compile: capturing a type with no pickler is rejected statically.
#include <scp/spore.hpp>

struct OpaqueHandle {
  int fd;
};

int main() {
  scp::Registry reg;
  reg.bodies().add_unary<int32_t, int32_t>("id", [](scp::EnvView, int32_t x) { return x; });
  auto s = scp::make_spore<int32_t, int32_t>(reg, "id", scp::cap("h", OpaqueHandle{3}));
  (void)s;
  return 0;
}
