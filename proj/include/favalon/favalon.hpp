#pragma once

#include "favalon/environment.hpp"
#include "favalon/eval.hpp"
#include "favalon/expr.hpp"
#include "favalon/host_value.hpp"
#include "favalon/infer.hpp"
#include "favalon/lexer.hpp"
#include "favalon/parser.hpp"
#include "favalon/prelude.hpp"
#include "favalon/process.hpp"
#include "favalon/rewrite.hpp"
#include "favalon/session.hpp"
#include "favalon/shell.hpp"
#include "favalon/types.hpp"
