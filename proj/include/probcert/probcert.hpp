#pragma once

#include "probcert/analytic.hpp"
#include "probcert/certifier.hpp"
#include "probcert/network.hpp"
#include "probcert/radius_search.hpp"
#include "probcert/sampler.hpp"
