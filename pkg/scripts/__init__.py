# Scripts de utilidad del laboratorio de cascadas
