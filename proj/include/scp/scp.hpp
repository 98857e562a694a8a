#pragma once

// Umbrella header: the whole library.

#include "bytes.hpp"          // IWYU pragma: export
#include "combinators.hpp"    // IWYU pragma: export
#include "config.hpp"         // IWYU pragma: export
#include "errors.hpp"         // IWYU pragma: export
#include "future.hpp"         // IWYU pragma: export
#include "lineage.hpp"        // IWYU pragma: export
#include "local_cluster.hpp"  // IWYU pragma: export
#include "people.hpp"         // IWYU pragma: export
#include "pickle.hpp"         // IWYU pragma: export
#include "reference_eval.hpp" // IWYU pragma: export
#include "runtime.hpp"        // IWYU pragma: export
#include "silo.hpp"           // IWYU pragma: export
#include "socket_transport.hpp" // IWYU pragma: export
#include "spore.hpp"          // IWYU pragma: export
#include "transport.hpp"      // IWYU pragma: export
#include "type_tag.hpp"       // IWYU pragma: export
#include "wire.hpp"           // IWYU pragma: export
