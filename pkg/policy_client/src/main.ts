import { stdin, stdout } from "node:process";

import { serve } from "./session.js";

serve(stdin, stdout).then(() => process.exit(0));
