#pragma once

#include "skillmind/annotation.hpp"        // IWYU pragma: export
#include "skillmind/chat_backend.hpp"      // IWYU pragma: export
#include "skillmind/context_templates.hpp" // IWYU pragma: export
#include "skillmind/corpus.hpp"            // IWYU pragma: export
#include "skillmind/errors.hpp"            // IWYU pragma: export
#include "skillmind/evaluation.hpp"        // IWYU pragma: export
#include "skillmind/rng.hpp"               // IWYU pragma: export
#include "skillmind/som_runtime.hpp"       // IWYU pragma: export
#include "skillmind/taxonomy.hpp"          // IWYU pragma: export
#include "skillmind/version.hpp"           // IWYU pragma: export
