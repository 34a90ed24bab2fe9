from django.contrib import admin
from import_export.admin import ImportExportModelAdmin

from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(ImportExportModelAdmin):
    list_display = ["kind", "seed", "status", "wall_clock_seconds", "version", "created_at"]
    list_filter = ["kind", "status", "created_at"]
    search_fields = ["kind", "seed", "output_dir"]
    ordering = ["-created_at"]
    readonly_fields = ["created_at"]
