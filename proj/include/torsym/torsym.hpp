#pragma once

#include "torsym/error.hpp"
#include "torsym/field.hpp"
#include "torsym/field_io.hpp"
#include "torsym/random_fields.hpp"
#include "torsym/rearrange.hpp"
#include "torsym/energy.hpp"
#include "torsym/minimize.hpp"
#include "torsym/geom.hpp"
#include "torsym/gallery.hpp"
#include "torsym/config.hpp"
#include "torsym/verify.hpp"
#include "torsym/pipeline.hpp"
